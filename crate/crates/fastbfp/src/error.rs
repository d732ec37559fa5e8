use thiserror::Error;

/// Errors produced by quantization, arithmetic, storage, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN or +/-Inf where a finite value is required.
    #[error("non-finite input value at index {0}")]
    NonFiniteInput(usize),

    /// Two groups entering a dot product have different group sizes.
    #[error("group size mismatch: {left} vs {right}")]
    GroupSizeMismatch { left: usize, right: usize },

    /// Mantissa width must be even (and at least 2) for chunked execution.
    #[error("mantissa width {0} is not an even positive width")]
    OddMantissaWidth(u32),

    /// A shared exponent does not fit into the configured storage width.
    #[error("shared exponent {exponent} does not fit in {e_bits} storage bits")]
    ExponentOverflow { exponent: i32, e_bits: u32 },

    /// A packed image or container file failed structural validation.
    #[error("malformed packed image: {0}")]
    MalformedImage(String),

    /// A layer or iteration index fell outside the schedule bounds.
    #[error("index out of range: {0}")]
    OutOfRangeIndex(String),

    /// Operand shapes do not conform to the requested matrix operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Configuration value failed validation before dispatch.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
