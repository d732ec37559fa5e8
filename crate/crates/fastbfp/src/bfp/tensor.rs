//! Tensor-level quantization: groups are formed along the dot-product
//! reduction axis and quantized independently.

use super::group::{quantize_group, BfpGroup, RoundingMode, DEFAULT_EXPONENT_BITS};
use super::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A tensor quantized into BFP groups along one axis.
///
/// Groups are stored with the grouped axis innermost: group `j` of outer
/// slice `o` lives at `o * groups_per_axis + j`. The last group along the
/// axis is zero-padded; padding dequantizes to exactly zero and is dropped
/// on reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct BfpTensor {
    shape: Vec<usize>,
    group_axis: usize,
    group_size: usize,
    mantissa_bits: u32,
    exponent_bits: u32,
    groups: Vec<BfpGroup>,
}

impl BfpTensor {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn group_axis(&self) -> usize {
        self.group_axis
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn groups(&self) -> &[BfpGroup] {
        &self.groups
    }

    /// Number of groups along the grouped axis.
    pub fn groups_per_axis(&self) -> usize {
        self.shape[self.group_axis].div_ceil(self.group_size)
    }

    /// Number of outer slices (product of the non-grouped axes).
    pub fn outer_count(&self) -> usize {
        self.shape
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != self.group_axis)
            .map(|(_, &n)| n)
            .product()
    }

    /// Group `j` along the axis within outer slice `o`.
    pub fn group(&self, outer: usize, j: usize) -> &BfpGroup {
        &self.groups[outer * self.groups_per_axis() + j]
    }

    /// Exact dequantization back to the original shape (padding dropped).
    pub fn dequantize(&self) -> Tensor {
        let mut out = Tensor::zeros(&self.shape);
        let gpa = self.groups_per_axis();
        let axis_len = self.shape[self.group_axis];
        for (o, base) in outer_offsets(&self.shape, self.group_axis).enumerate() {
            let stride = self.strides()[self.group_axis];
            for j in 0..gpa {
                let vals = self.groups[o * gpa + j].dequantize();
                for (s, &v) in vals.iter().enumerate() {
                    let pos = j * self.group_size + s;
                    if pos < axis_len {
                        out.data_mut()[base + pos * stride] = v;
                    }
                }
            }
        }
        out
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    /// Total packed storage bits for this tensor under its metadata.
    pub fn storage_bits(&self) -> u64 {
        self.groups.len() as u64
            * crate::storage::storage_bits(self.exponent_bits, self.group_size, self.mantissa_bits)
    }
}

/// Iterator over the flat base offset of each outer slice (all axes except
/// `axis` in row-major order).
fn outer_offsets(shape: &[usize], axis: usize) -> impl Iterator<Item = usize> + '_ {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let outer_axes: Vec<usize> = (0..shape.len()).filter(|&a| a != axis).collect();
    let outer_total: usize = outer_axes.iter().map(|&a| shape[a]).product();
    (0..outer_total).map(move |o| {
        let mut rem = o;
        let mut base = 0;
        for &a in outer_axes.iter().rev() {
            base += (rem % shape[a]) * strides[a];
            rem /= shape[a];
        }
        base
    })
}

/// Quantize a tensor along `axis` with group size `g` and mantissa width `m`.
///
/// Each group draws noise from a stream keyed by its flat group index, so
/// group order (or parallel execution) cannot change the result.
pub fn quantize_tensor(
    t: &Tensor,
    axis: usize,
    g: usize,
    m: u32,
    mode: RoundingMode,
    noise: &NoiseSource,
) -> Result<BfpTensor> {
    if axis >= t.shape().len() {
        return Err(Error::ShapeMismatch(format!(
            "group axis {axis} out of range for shape {:?}",
            t.shape()
        )));
    }
    if g == 0 {
        return Err(Error::InvalidConfig("group size must be positive".into()));
    }
    if let Some(bad) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(bad));
    }
    let axis_len = t.shape()[axis];
    let gpa = axis_len.div_ceil(g);
    let stride = t.strides()[axis];
    let mut groups = Vec::with_capacity(gpa);
    let mut scratch = Vec::with_capacity(g);
    for (o, base) in outer_offsets(t.shape(), axis).enumerate() {
        for j in 0..gpa {
            scratch.clear();
            let start = j * g;
            let end = (start + g).min(axis_len);
            for pos in start..end {
                scratch.push(t.data()[base + pos * stride]);
            }
            let index = (o * gpa + j) as u64;
            groups.push(quantize_group(&scratch, g, m, mode, noise, index)?);
        }
    }
    Ok(BfpTensor {
        shape: t.shape().to_vec(),
        group_axis: axis,
        group_size: g,
        mantissa_bits: m,
        exponent_bits: DEFAULT_EXPONENT_BITS,
        groups,
    })
}

/// Assemble a tensor from pre-built groups plus metadata (used by file I/O).
pub fn from_groups(
    shape: Vec<usize>,
    group_axis: usize,
    group_size: usize,
    mantissa_bits: u32,
    exponent_bits: u32,
    groups: Vec<BfpGroup>,
) -> Result<BfpTensor> {
    if group_axis >= shape.len() {
        return Err(Error::ShapeMismatch(format!(
            "group axis {group_axis} out of range for shape {shape:?}"
        )));
    }
    let axis_len = shape[group_axis];
    let outer: usize = shape
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != group_axis)
        .map(|(_, &n)| n)
        .product();
    let expect = axis_len.div_ceil(group_size) * outer;
    if groups.len() != expect {
        return Err(Error::MalformedImage(format!(
            "expected {expect} groups for shape {shape:?}, got {}",
            groups.len()
        )));
    }
    if groups
        .iter()
        .any(|grp| grp.group_size() != group_size || grp.mantissa_bits() != mantissa_bits)
    {
        return Err(Error::MalformedImage(
            "group metadata disagrees with tensor metadata".into(),
        ));
    }
    Ok(BfpTensor {
        shape,
        group_axis,
        group_size,
        mantissa_bits,
        exponent_bits,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise() -> NoiseSource {
        NoiseSource::new(11)
    }

    #[test]
    fn identical_values_one_group_exact() {
        let t = Tensor::matrix(1, 16, vec![0.75; 16]).unwrap();
        let q = quantize_tensor(&t, 1, 16, 4, RoundingMode::Truncate, &noise()).unwrap();
        assert_eq!(q.groups().len(), 1);
        assert_eq!(q.dequantize(), t);
    }

    #[test]
    fn padding_makes_two_groups_for_twenty_elements() {
        let t = Tensor::matrix(1, 20, (0..20).map(|i| i as f32).collect()).unwrap();
        let q = quantize_tensor(&t, 1, 16, 4, RoundingMode::Truncate, &noise()).unwrap();
        assert_eq!(q.groups().len(), 2);
        assert_eq!(q.groups()[1].dequantize()[4..], [0.0; 12]);
        assert_eq!(q.dequantize().shape(), &[1, 20]);
    }

    #[test]
    fn group_count_matches_formula() {
        let t = Tensor::zeros(&[4, 32]);
        let q = quantize_tensor(&t, 1, 16, 2, RoundingMode::Truncate, &noise()).unwrap();
        assert_eq!(q.groups().len(), 4 * 2);
        let q = quantize_tensor(&t, 0, 16, 2, RoundingMode::Truncate, &noise()).unwrap();
        assert_eq!(q.groups().len(), 1 * 32);
    }

    #[test]
    fn axis_zero_grouping_reads_columns() {
        // 4x2 matrix, axis 0, g=4: two groups, one per column; powers of
        // two with spread 3 stay exact at m=4
        let t = Tensor::matrix(4, 2, vec![1., 8., 2., 16., 4., 32., 8., 64.]).unwrap();
        let q = quantize_tensor(&t, 0, 4, 4, RoundingMode::Truncate, &noise()).unwrap();
        assert_eq!(q.group(0, 0).dequantize(), vec![1., 2., 4., 8.]);
        assert_eq!(q.group(1, 0).dequantize(), vec![8., 16., 32., 64.]);
        assert_eq!(q.dequantize(), t);
    }

    #[test]
    fn per_group_error_bounded_by_group_max() {
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 40) as f32 / (1u64 << 20) as f32 * 2.0 - 1.0
        };
        let t = Tensor::matrix(4, 32, (0..128).map(|_| next()).collect()).unwrap();
        for m in [2u32, 4] {
            let q = quantize_tensor(&t, 1, 16, m, RoundingMode::Truncate, &noise()).unwrap();
            let back = q.dequantize();
            let gpa = q.groups_per_axis();
            for r in 0..4 {
                for j in 0..gpa {
                    let lo = j * 16;
                    let hi = (lo + 16).min(32);
                    let max_mag = (lo..hi)
                        .map(|c| t.get(r, c).abs())
                        .fold(0f32, f32::max);
                    let bound = max_mag * 2f32.powi(-(m as i32 - 1));
                    for c in lo..hi {
                        let err = (back.get(r, c) - t.get(r, c)).abs();
                        assert!(
                            err <= bound * (1.0 + 1e-6),
                            "m={m} err {err} bound {bound}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let t = Tensor::matrix(3, 17, (0..51).map(|i| (i as f32).sin()).collect()).unwrap();
        let a = quantize_tensor(
            &t,
            1,
            16,
            2,
            RoundingMode::stochastic_default(),
            &NoiseSource::with_stream(1, 2),
        )
        .unwrap();
        let b = quantize_tensor(
            &t,
            1,
            16,
            2,
            RoundingMode::stochastic_default(),
            &NoiseSource::with_stream(1, 2),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite_and_bad_axis() {
        let t = Tensor::matrix(1, 2, vec![1.0, f32::NAN]).unwrap();
        assert!(matches!(
            quantize_tensor(&t, 1, 16, 2, RoundingMode::Truncate, &noise()),
            Err(Error::NonFiniteInput(1))
        ));
        let t = Tensor::zeros(&[2, 2]);
        assert!(quantize_tensor(&t, 2, 16, 2, RoundingMode::Truncate, &noise()).is_err());
    }
}
