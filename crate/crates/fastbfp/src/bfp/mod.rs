//! Block floating point numerics: FP decomposition, group quantization
//! with truncation / nearest / stochastic rounding, tensor-level grouping,
//! and exponent-spread analysis.

mod fp;
mod group;
mod noise;
mod spread;
mod tensor;

pub use fp::{decompose_fp, pow2, FpScalar, Sign, F32_FRACTION_BITS, ZERO_EXPONENT};
pub use group::{
    quantize_group, BfpGroup, RoundingMode, DEFAULT_EXPONENT_BITS, DEFAULT_GROUP_SIZE,
    DEFAULT_NOISE_BITS, MAX_MANTISSA_BITS,
};
pub use noise::NoiseSource;
pub use spread::{exponent_spread_histogram, SpreadHistogram, SPREAD_BUCKETS};
pub use tensor::{from_groups, quantize_tensor, BfpTensor};
