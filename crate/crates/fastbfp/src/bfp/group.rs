//! Group quantization: shared-exponent extraction, mantissa alignment,
//! rounding, and truncation to a fixed mantissa width.

use super::fp::{decompose_int, pow2, Sign, ZERO_EXPONENT};
use super::noise::NoiseSource;
use crate::error::{Error, Result};

/// Default group size.
pub const DEFAULT_GROUP_SIZE: usize = 16;

/// Default stored-exponent bitwidth used for storage accounting.
pub const DEFAULT_EXPONENT_BITS: u32 = 3;

/// Default number of stochastic noise bits.
pub const DEFAULT_NOISE_BITS: u32 = 3;

/// Widest mantissa the emulator accepts (hardware uses 2 and 4; wider even
/// widths are allowed for tests and experiments).
pub const MAX_MANTISSA_BITS: u32 = 8;

/// How aligned mantissas are rounded when low-order bits are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RoundingMode {
    /// Drop low-order bits (round toward zero on the magnitude).
    Truncate,
    /// Round half up on the magnitude, saturating at the widest mantissa.
    Nearest,
    /// Add `noise_bits` of uniform noise below the kept bits, then truncate.
    Stochastic { noise_bits: u32 },
}

impl RoundingMode {
    pub fn stochastic_default() -> Self {
        RoundingMode::Stochastic {
            noise_bits: DEFAULT_NOISE_BITS,
        }
    }

    fn validate(self) -> Result<()> {
        if let RoundingMode::Stochastic { noise_bits } = self {
            if noise_bits < 1 || noise_bits > 32 {
                return Err(Error::InvalidConfig(format!(
                    "stochastic noise bits must be in 1..=32, got {noise_bits}"
                )));
            }
        }
        Ok(())
    }
}

/// One shared exponent plus `g` sign-magnitude mantissas.
///
/// Element `i` has value `signs[i] * mantissas[i] * 2^(shared_exponent - (m-1))`:
/// the binary point sits after the leading mantissa bit, so the top bit of a
/// full-scale mantissa carries weight `2^shared_exponent`. An all-zero group
/// stores the sentinel exponent [`ZERO_EXPONENT`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfpGroup {
    shared_exponent: i32,
    mantissa_bits: u32,
    signs: Vec<Sign>,
    mantissas: Vec<u32>,
}

fn validate_mantissa_bits(m: u32) -> Result<()> {
    if m < 2 || m > MAX_MANTISSA_BITS || m % 2 != 0 {
        return Err(Error::OddMantissaWidth(m));
    }
    Ok(())
}

impl BfpGroup {
    /// Build a group from raw parts.
    ///
    /// Canonicalizes zeros: a zero mantissa always carries a plus sign and
    /// an all-zero group stores the sentinel exponent, so structurally
    /// equal values compare equal.
    pub fn new(
        shared_exponent: i32,
        mantissa_bits: u32,
        mut signs: Vec<Sign>,
        mantissas: Vec<u32>,
    ) -> Result<Self> {
        validate_mantissa_bits(mantissa_bits)?;
        if signs.len() != mantissas.len() {
            return Err(Error::GroupSizeMismatch {
                left: signs.len(),
                right: mantissas.len(),
            });
        }
        let limit = 1u32 << mantissa_bits;
        if let Some(bad) = mantissas.iter().position(|&v| v >= limit) {
            return Err(Error::MalformedImage(format!(
                "mantissa {} at index {bad} exceeds {mantissa_bits} bits",
                mantissas[bad]
            )));
        }
        for (s, &mant) in signs.iter_mut().zip(&mantissas) {
            if mant == 0 {
                *s = Sign::Plus;
            }
        }
        let shared_exponent = if mantissas.iter().all(|&v| v == 0) {
            ZERO_EXPONENT
        } else {
            shared_exponent
        };
        Ok(BfpGroup {
            shared_exponent,
            mantissa_bits,
            signs,
            mantissas,
        })
    }

    pub fn zero(g: usize, mantissa_bits: u32) -> Self {
        BfpGroup {
            shared_exponent: ZERO_EXPONENT,
            mantissa_bits,
            signs: vec![Sign::Plus; g],
            mantissas: vec![0; g],
        }
    }

    pub fn shared_exponent(&self) -> i32 {
        self.shared_exponent
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn group_size(&self) -> usize {
        self.mantissas.len()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn mantissas(&self) -> &[u32] {
        &self.mantissas
    }

    pub fn is_zero(&self) -> bool {
        self.shared_exponent == ZERO_EXPONENT
    }

    /// Scale of one mantissa unit: `2^(shared_exponent - (m - 1))`.
    pub fn ulp_exponent(&self) -> i32 {
        self.shared_exponent - (self.mantissa_bits as i32 - 1)
    }

    /// Exact dequantization into f64 (never rounds for supported widths).
    pub fn dequantize_f64(&self) -> Vec<f64> {
        if self.is_zero() {
            return vec![0.0; self.group_size()];
        }
        let scale = pow2(self.ulp_exponent());
        self.mantissas
            .iter()
            .zip(&self.signs)
            .map(|(&mant, &sign)| {
                if mant == 0 {
                    0.0
                } else {
                    sign.as_f32() as f64 * mant as f64 * scale
                }
            })
            .collect()
    }

    /// Dequantize into f32; exact whenever the result is a normal f32.
    pub fn dequantize(&self) -> Vec<f32> {
        self.dequantize_f64().iter().map(|&v| v as f32).collect()
    }
}

/// Quantize up to `g` floats into one BFP group (shorter input zero-pads).
///
/// The largest element exponent becomes the shared exponent; every mantissa
/// is the element magnitude aligned to that exponent and truncated to `m`
/// bits, with optional nearest or stochastic rounding applied first.
/// Rounding saturates at the all-ones mantissa so no carry can escape the
/// mantissa field. `group_index` keys the per-group noise stream.
pub fn quantize_group(
    values: &[f32],
    g: usize,
    m: u32,
    mode: RoundingMode,
    noise: &NoiseSource,
    group_index: u64,
) -> Result<BfpGroup> {
    validate_mantissa_bits(m)?;
    mode.validate()?;
    if values.len() > g {
        return Err(Error::GroupSizeMismatch {
            left: values.len(),
            right: g,
        });
    }
    let mut parts = Vec::with_capacity(g);
    for (i, &v) in values.iter().enumerate() {
        let p = decompose_int(v).map_err(|_| Error::NonFiniteInput(i))?;
        parts.push(p);
    }

    let max_exp = parts
        .iter()
        .filter(|p| p.mantissa != 0)
        .map(|p| p.exponent)
        .max();
    let Some(max_exp) = max_exp else {
        return Ok(BfpGroup::zero(g, m));
    };

    let cap = (1u32 << m) - 1;
    let mut signs = vec![Sign::Plus; g];
    let mut mantissas = vec![0u32; g];
    for (i, p) in parts.iter().enumerate() {
        signs[i] = p.sign;
        if p.mantissa == 0 {
            continue;
        }
        // Aligned magnitude in mantissa units is mantissa * 2^(-t) with
        // t = 24 + (max_exp - exponent) - m discarded fraction bits.
        let t = 24 + (max_exp - p.exponent) as i64 - m as i64;
        let (kept, residue, t) = if t <= 0 {
            (u64::from(p.mantissa) << (-t), 0u64, 0u32)
        } else if t >= 24 {
            (0u64, u64::from(p.mantissa), t.min(u32::MAX as i64) as u32)
        } else {
            let t = t as u32;
            (
                u64::from(p.mantissa >> t),
                u64::from(p.mantissa & ((1 << t) - 1)),
                t,
            )
        };
        let round_up = match mode {
            RoundingMode::Truncate => false,
            RoundingMode::Nearest => t > 0 && t <= 24 && residue >= 1u64 << (t - 1),
            RoundingMode::Stochastic { noise_bits } => {
                // Noise is added to the top `noise_bits` of the residue
                // field with natural carry into the kept bits: round up
                // iff residue * 2^nb + u * 2^t >= 2^(nb + t).
                if t == 0 || u64::from(t) >= 24 + u64::from(noise_bits) {
                    false
                } else {
                    let u = noise.draw(group_index, i as u64, noise_bits);
                    let lhs = (residue as u128) << noise_bits;
                    let rhs = ((1u128 << noise_bits) - u as u128) << t;
                    lhs >= rhs
                }
            }
        };
        let q = kept + u64::from(round_up);
        mantissas[i] = (q.min(u64::from(cap))) as u32;
    }
    BfpGroup::new(max_exp, m, signs, mantissas)
}
