//! Float tensor files: raw little-endian f32 data in row-major order with
//! a JSON sidecar (`<path>.json`) carrying shape, dtype, and grouping axis.

use crate::error::{Error, Result};
use crate::storage::sidecar_path;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloatSidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub group_axis: usize,
}

pub fn write_float_tensor(path: &Path, t: &Tensor, group_axis: usize) -> Result<()> {
    let mut bytes = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    let sidecar = FloatSidecar {
        shape: t.shape().to_vec(),
        dtype: "f32".into(),
        group_axis,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_float_tensor(path: &Path) -> Result<(Tensor, usize)> {
    let sidecar: FloatSidecar =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if sidecar.dtype != "f32" {
        return Err(Error::InvalidConfig(format!(
            "unsupported dtype {}",
            sidecar.dtype
        )));
    }
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::MalformedImage("tensor byte length not a multiple of 4".into()));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let t = Tensor::from_vec(&sidecar.shape, data)?;
    if sidecar.group_axis >= t.shape().len() {
        return Err(Error::InvalidConfig(format!(
            "group axis {} out of range for shape {:?}",
            sidecar.group_axis,
            t.shape()
        )));
    }
    Ok((t, sidecar.group_axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let t = Tensor::matrix(2, 3, vec![1.5, -0.0, f32::MIN_POSITIVE, 3e8, -7.25, 0.1]).unwrap();
        write_float_tensor(&path, &t, 1).unwrap();
        let (back, axis) = read_float_tensor(&path).unwrap();
        assert_eq!(axis, 1);
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
