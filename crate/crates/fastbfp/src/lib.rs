//! Bit-exact emulation of variable-precision block-floating-point (BFP)
//! DNN training.
//!
//! A group of values shares one exponent while keeping individual
//! sign-magnitude mantissas. Dot products between two groups then reduce
//! to integer multiplies, one exponent addition, and a single float
//! normalization — and by slicing mantissas into 2-bit chunks the same
//! multiply-accumulate unit serves any even mantissa width, at a cost of
//! `(m_x/2) * (m_y/2)` passes per group pair.
//!
//! The crate provides, bottom up:
//!
//! - [`bfp`]: FP32 decomposition, group/tensor quantization with truncate,
//!   nearest, and stochastic rounding, and exponent-spread analysis.
//! - [`fmac`]: the multiply-accumulate core; single-shot and chunked
//!   multi-pass dot products, bit-identical to each other.
//! - [`storage`]: chunk-major packed images (`e + g * m/2 * 3` bits per
//!   group) and the `FASTBFP1` container format.
//! - [`precision`]: the adaptive precision rule — relative improvement of
//!   4-bit over 2-bit mantissas against a layer/iteration threshold.
//! - [`systolic`]: functional simulation of the fMAC array in its three
//!   dataflow modes with tile/cycle/energy cost accounting.
//! - [`train`]: a desk-scale training harness wiring every matrix product
//!   through the simulator under configurable precision schedules.
//! - [`cli`]: the `fastbfp` binary's subcommands (quantize, dot, simulate,
//!   train, report).
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod bfp;
pub mod cli;
pub mod error;
pub mod fmac;
pub mod io;
pub mod precision;
pub mod storage;
pub mod systolic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
