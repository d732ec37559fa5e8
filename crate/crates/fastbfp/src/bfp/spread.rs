//! Exponent-spread analysis: distribution of (shared exponent − element
//! exponent) per group. Large differences mean long alignment shifts and
//! therefore large truncation error.

use super::fp::decompose_fp;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bucket count for explicit differences; anything at or above this (or an
/// element that is zero in a nonzero group) lands in the overflow bucket.
pub const SPREAD_BUCKETS: usize = 64;

/// Histogram of per-group exponent differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadHistogram {
    pub counts: [u64; SPREAD_BUCKETS],
    pub overflow: u64,
}

impl SpreadHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    /// Mean difference with overflow entries clamped to `SPREAD_BUCKETS`.
    pub fn clamped_mean(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let sum: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(d, &c)| d as u64 * c)
            .sum::<u64>()
            + self.overflow * SPREAD_BUCKETS as u64;
        sum as f64 / total as f64
    }

    /// CSV rows `diff,count` for 0..63 then a final `overflow` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("diff,count\n");
        for (d, &c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{d},{c}\n"));
        }
        out.push_str(&format!("overflow,{}\n", self.overflow));
        out
    }
}

/// Histogram of `max_exp - element_exp` over groups of size `g` formed
/// along `axis`. Counts sum to the tensor element count. Zeros in a group
/// with a nonzero leader count as overflow (their mantissa would shift out
/// entirely); an all-zero group contributes difference 0 for each element.
pub fn exponent_spread_histogram(t: &Tensor, axis: usize, g: usize) -> Result<SpreadHistogram> {
    if t.is_empty() {
        return Err(Error::ShapeMismatch("empty tensor".into()));
    }
    if axis >= t.shape().len() {
        return Err(Error::ShapeMismatch(format!(
            "axis {axis} out of range for shape {:?}",
            t.shape()
        )));
    }
    if let Some(bad) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(bad));
    }
    let mut hist = SpreadHistogram {
        counts: [0; SPREAD_BUCKETS],
        overflow: 0,
    };
    let axis_len = t.shape()[axis];
    let stride = t.strides()[axis];
    let gpa = axis_len.div_ceil(g);
    let outer: usize = t
        .shape()
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != axis)
        .map(|(_, &n)| n)
        .product();

    let mut exps: Vec<Option<i32>> = Vec::with_capacity(g);
    for o in 0..outer {
        let base = outer_base(t.shape(), axis, o);
        for j in 0..gpa {
            exps.clear();
            let start = j * g;
            let end = (start + g).min(axis_len);
            for pos in start..end {
                let s = decompose_fp(t.data()[base + pos * stride])?;
                exps.push(if s.is_zero() { None } else { Some(s.exponent) });
            }
            let max = exps.iter().flatten().max().copied();
            match max {
                None => {
                    // all-zero group: no alignment, difference 0
                    hist.counts[0] += exps.len() as u64;
                }
                Some(max) => {
                    for e in &exps {
                        match e {
                            Some(e) => {
                                let d = (max - e) as usize;
                                if d < SPREAD_BUCKETS {
                                    hist.counts[d] += 1;
                                } else {
                                    hist.overflow += 1;
                                }
                            }
                            None => hist.overflow += 1,
                        }
                    }
                }
            }
        }
    }
    Ok(hist)
}

fn outer_base(shape: &[usize], axis: usize, o: usize) -> usize {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let mut rem = o;
    let mut base = 0;
    for a in (0..shape.len()).rev() {
        if a == axis {
            continue;
        }
        base += (rem % shape[a]) * strides[a];
        rem /= shape[a];
    }
    base
}
