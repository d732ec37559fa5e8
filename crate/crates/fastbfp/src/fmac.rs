//! The multiply-accumulate core: dot products between two BFP groups,
//! decomposed into integer partial products plus one exponent addition,
//! executed either in a single shot or as multiple 2-bit chunk passes.
//!
//! Partial products within and across passes are exact integers scaled by
//! a power of two; the single float rounding happens when a group-pair
//! result is normalized, before cross-group accumulation in f32.

use crate::bfp::{BfpGroup, FpScalar, Sign};
use crate::error::{Error, Result};

/// Width of one mantissa chunk. The engine is hardwired to 2-bit chunks.
pub const CHUNK_BITS: u32 = 2;

/// A 2-bit slice of every mantissa in a group, high-order first.
/// Chunk `k` carries an effective exponent of `shared_exponent - 2k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkedMantissaPlane {
    pub chunk_index: u32,
    pub effective_exponent: i32,
    pub chunks: Vec<u8>,
}

/// Deterministic f32 accumulator spanning group-pair results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FpAccumulator {
    value: f32,
}

impl FpAccumulator {
    pub fn new() -> Self {
        FpAccumulator { value: 0.0 }
    }

    pub fn value(&self) -> f32 {
        self.value
    }

    /// One f32 addition; callers fix the order (group-index order).
    pub fn accumulate(&mut self, partial: FpScalar) {
        self.value += partial.to_f32();
    }

    pub fn accumulate_f32(&mut self, partial: f32) {
        self.value += partial;
    }
}

/// Number of fMAC passes needed for mantissa widths `(m_x, m_y)`:
/// `(m_x / 2) * (m_y / 2)`.
pub fn pass_count(m_x: u32, m_y: u32) -> Result<u32> {
    for m in [m_x, m_y] {
        if m < 2 || m % 2 != 0 {
            return Err(Error::OddMantissaWidth(m));
        }
    }
    Ok((m_x / 2) * (m_y / 2))
}

fn check_pair(x: &BfpGroup, y: &BfpGroup) -> Result<()> {
    if x.group_size() != y.group_size() {
        return Err(Error::GroupSizeMismatch {
            left: x.group_size(),
            right: y.group_size(),
        });
    }
    Ok(())
}

/// Signed integer sum of elementwise mantissa products. Exact: fits well
/// inside i64 for g <= 64, m <= 8.
fn mantissa_product_sum(x: &BfpGroup, y: &BfpGroup) -> i64 {
    let mut sum = 0i64;
    for i in 0..x.group_size() {
        let prod = i64::from(x.mantissas()[i]) * i64::from(y.mantissas()[i]);
        match x.signs()[i].xor(y.signs()[i]) {
            Sign::Plus => sum += prod,
            Sign::Minus => sum -= prod,
        }
    }
    sum
}

fn normalize(sum: i64, scale: i32) -> FpScalar {
    let sign = if sum < 0 { Sign::Minus } else { Sign::Plus };
    FpScalar::from_int_scaled(sign, sum.unsigned_abs(), scale)
}

/// Dot product of two BFP groups: one integer multiply-add tree over the
/// mantissa pairs, one exponent addition, one normalization to a scalar.
pub fn bfp_dot(x: &BfpGroup, y: &BfpGroup) -> Result<FpScalar> {
    check_pair(x, y)?;
    if x.is_zero() || y.is_zero() {
        return Ok(FpScalar::ZERO);
    }
    let sum = mantissa_product_sum(x, y);
    let scale = x.ulp_exponent() + y.ulp_exponent();
    Ok(normalize(sum, scale))
}

/// Slice a group into `m/2` chunk planes, high-order chunk first.
/// Concatenating the planes reconstructs every mantissa exactly.
pub fn chunk(grp: &BfpGroup) -> Result<Vec<ChunkedMantissaPlane>> {
    let m = grp.mantissa_bits();
    if m % 2 != 0 || m == 0 {
        return Err(Error::OddMantissaWidth(m));
    }
    let planes = m / CHUNK_BITS;
    let mut out = Vec::with_capacity(planes as usize);
    for k in 0..planes {
        let shift = m - CHUNK_BITS - CHUNK_BITS * k;
        out.push(ChunkedMantissaPlane {
            chunk_index: k,
            effective_exponent: grp.shared_exponent().saturating_sub((CHUNK_BITS * k) as i32),
            chunks: grp
                .mantissas()
                .iter()
                .map(|&v| ((v >> shift) & 0b11) as u8)
                .collect(),
        });
    }
    Ok(out)
}

/// Reassemble mantissas from chunk planes (test and storage helper).
pub fn reconstruct_mantissas(planes: &[ChunkedMantissaPlane]) -> Vec<u32> {
    let g = planes.first().map_or(0, |p| p.chunks.len());
    let mut out = vec![0u32; g];
    for p in planes {
        for (i, &c) in p.chunks.iter().enumerate() {
            out[i] |= u32::from(c) << (CHUNK_BITS * (planes.len() as u32 - 1 - p.chunk_index));
        }
    }
    out
}

/// Per-pass record emitted by [`chunked_dot_traced`].
#[derive(Debug, Clone, Copy)]
pub struct PassTrace {
    pub pass: u32,
    pub x_chunk: u32,
    pub y_chunk: u32,
    /// Integer partial-product sum of this pass.
    pub partial_sum: i64,
    /// Exact running total in units of the final (lowest) chunk scale.
    pub running_total: i64,
}

/// Multi-pass dot product over 2-bit chunk pairs.
///
/// Executes `pass_count(m_x, m_y)` single-chunk passes; cross-pass partials
/// are held exactly (integers in units of the lowest chunk scale) and
/// normalized once, so the result is bit-identical to [`bfp_dot`].
pub fn chunked_dot(x: &BfpGroup, y: &BfpGroup) -> Result<FpScalar> {
    Ok(chunked_dot_traced(x, y, None)?)
}

/// As [`chunked_dot`] but optionally records per-pass partial sums.
pub fn chunked_dot_traced(
    x: &BfpGroup,
    y: &BfpGroup,
    mut trace: Option<&mut Vec<PassTrace>>,
) -> Result<FpScalar> {
    check_pair(x, y)?;
    let expected_passes = pass_count(x.mantissa_bits(), y.mantissa_bits())?;
    if x.is_zero() || y.is_zero() {
        return Ok(FpScalar::ZERO);
    }
    let x_planes = chunk(x)?;
    let y_planes = chunk(y)?;

    // The lowest-order chunk pair works in units of the parent groups'
    // combined ulp, which is also the single-shot dot product scale.
    let base_scale = x.ulp_exponent() + y.ulp_exponent();

    let mut total = 0i64;
    let mut executed = 0u32;
    for xp in &x_planes {
        for yp in &y_planes {
            let mut partial = 0i64;
            for i in 0..x.group_size() {
                let prod = i64::from(xp.chunks[i]) * i64::from(yp.chunks[i]);
                match x.signs()[i].xor(y.signs()[i]) {
                    Sign::Plus => partial += prod,
                    Sign::Minus => partial -= prod,
                }
            }
            // Shift this pass up to the common lowest scale.
            let up = CHUNK_BITS * (x_planes.len() as u32 - 1 - xp.chunk_index)
                + CHUNK_BITS * (y_planes.len() as u32 - 1 - yp.chunk_index);
            total += partial << up;
            executed += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(PassTrace {
                    pass: executed,
                    x_chunk: xp.chunk_index,
                    y_chunk: yp.chunk_index,
                    partial_sum: partial,
                    running_total: total,
                });
            }
        }
    }
    debug_assert_eq!(executed, expected_passes);
    Ok(normalize(total, base_scale))
}
