//! Lossless sign/exponent/mantissa decomposition of finite `f32` values.

use crate::error::{Error, Result};

/// Sign of a value held in sign-magnitude form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_is_negative(neg: bool) -> Self {
        if neg {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    /// +1.0 or -1.0.
    pub fn as_f32(self) -> f32 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn xor(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Sentinel exponent for a canonical zero. Smaller than any reachable
/// exponent so `max` over a group ignores zeros.
pub const ZERO_EXPONENT: i32 = i32::MIN;

/// Number of fraction bits in an IEEE 754 binary32 mantissa.
pub const F32_FRACTION_BITS: u32 = 23;

/// A finite float split into sign, unbiased exponent, and fractional
/// mantissa in `[1, 2)` (or exactly 0 for the canonical zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpScalar {
    pub sign: Sign,
    pub exponent: i32,
    pub mantissa_frac: f64,
}

impl FpScalar {
    /// Canonical zero: positive sign, sentinel exponent, zero fraction.
    pub const ZERO: FpScalar = FpScalar {
        sign: Sign::Plus,
        exponent: ZERO_EXPONENT,
        mantissa_frac: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.mantissa_frac == 0.0
    }

    /// Reassemble the value. Exact for any scalar produced by
    /// [`decompose_fp`] and for integer-sum results small enough to fit a
    /// 32-bit mantissa.
    pub fn to_f32(&self) -> f32 {
        if self.is_zero() {
            return 0.0;
        }
        (self.sign.as_f32() as f64 * self.mantissa_frac * pow2(self.exponent)) as f32
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.sign.as_f32() as f64 * self.mantissa_frac * pow2(self.exponent)
    }

    /// Normalize an exact integer `magnitude * 2^scale` into a scalar.
    /// The integer must fit in 53 bits so the fraction stays exact.
    pub fn from_int_scaled(sign: Sign, magnitude: u64, scale: i32) -> FpScalar {
        if magnitude == 0 {
            return FpScalar::ZERO;
        }
        let top = 63 - magnitude.leading_zeros() as i32;
        FpScalar {
            sign,
            exponent: scale + top,
            mantissa_frac: magnitude as f64 / pow2(top),
        }
    }
}

/// 2^e as f64, exact over the exponent range reachable from f32 inputs.
pub fn pow2(e: i32) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Split a finite `f32` into [`FpScalar`] fields.
///
/// Subnormal inputs flush to the canonical zero: shared-exponent alignment
/// cannot represent them. NaN and infinities are rejected.
pub fn decompose_fp(x: f32) -> Result<FpScalar> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(0));
    }
    let bits = x.to_bits();
    let sign = Sign::from_is_negative(bits >> 31 == 1);
    let biased = ((bits >> 23) & 0xff) as i32;
    let frac_bits = bits & 0x7f_ffff;
    if biased == 0 {
        // Zero or subnormal: both map to canonical zero.
        return Ok(FpScalar::ZERO);
    }
    Ok(FpScalar {
        sign,
        exponent: biased - 127,
        mantissa_frac: 1.0 + frac_bits as f64 / pow2(F32_FRACTION_BITS as i32),
    })
}

/// Integer view of the same decomposition: magnitude = `mantissa * 2^(exponent - 23)`
/// with `mantissa` in `[2^23, 2^24)` for nonzero values. This is the form the
/// quantizer shifts and truncates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IntMantissa {
    pub sign: Sign,
    pub exponent: i32,
    /// 24-bit mantissa including the explicit leading one; 0 for zero.
    pub mantissa: u32,
}

pub(crate) fn decompose_int(x: f32) -> Result<IntMantissa> {
    let s = decompose_fp(x)?;
    if s.is_zero() {
        return Ok(IntMantissa {
            sign: Sign::Plus,
            exponent: ZERO_EXPONENT,
            mantissa: 0,
        });
    }
    let mantissa = (s.mantissa_frac * pow2(F32_FRACTION_BITS as i32)) as u32;
    Ok(IntMantissa {
        sign: s.sign,
        exponent: s.exponent,
        mantissa,
    })
}
