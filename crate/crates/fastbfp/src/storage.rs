//! Chunk-major packed storage for BFP groups.
//!
//! A packed group is `e` exponent bits followed by one record per chunk
//! plane, high-order plane first. Each record holds `g` three-bit entries:
//! two mantissa chunk bits plus the value's sign bit, so discarding the
//! low-order plane of an m=4 group leaves a complete m=2 group in place.
//! Bits fill bytes little-endian (stream bit k sits at byte k/8, bit k%8).

use crate::bfp::{from_groups, BfpGroup, BfpTensor, Sign, ZERO_EXPONENT};
use crate::error::{Error, Result};
use crate::fmac::CHUNK_BITS;
use std::io::{Read, Write};
use std::path::Path;

/// Total bits for one packed group: `e + g * (m/2) * 3`.
pub fn storage_bits(e_bits: u32, g: usize, m: u32) -> u64 {
    u64::from(e_bits) + g as u64 * u64::from(m / CHUNK_BITS) * 3
}

/// A group serialized to the chunk-major bit layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedGroupImage {
    e_bits: u32,
    group_size: usize,
    mantissa_bits: u32,
    bits: Vec<u8>,
}

impl PackedGroupImage {
    pub fn bit_len(&self) -> u64 {
        storage_bits(self.e_bits, self.group_size, self.mantissa_bits)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn e_bits(&self) -> u32 {
        self.e_bits
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    /// View of the high-order chunk plane as a standalone m=2 image:
    /// exactly what remains when the low-order chunks are discarded.
    pub fn truncate_to_m2(&self) -> PackedGroupImage {
        let mut w = BitWriter::new();
        let mut r = BitReader::new(&self.bits);
        w.put(r.take(self.e_bits), self.e_bits);
        for _ in 0..self.group_size {
            w.put(r.take(3), 3);
        }
        PackedGroupImage {
            e_bits: self.e_bits,
            group_size: self.group_size,
            mantissa_bits: 2,
            bits: w.finish(),
        }
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    used: u64,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            used: 0,
        }
    }

    fn put(&mut self, value: u64, width: u32) {
        for k in 0..width {
            let bit = (value >> k) & 1;
            let pos = (self.used % 8) as u32;
            if pos == 0 {
                self.bytes.push(0);
            }
            *self.bytes.last_mut().unwrap() |= (bit as u8) << pos;
            self.used += 1;
        }
    }

    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn take(&mut self, width: u32) -> u64 {
        let mut out = 0u64;
        for k in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (self.pos % 8)) & 1;
            out |= u64::from(bit) << k;
            self.pos += 1;
        }
        out
    }
}

/// Pack one group. The shared exponent is stored biased by `2^(e_bits-1)`;
/// an all-zero group stores a zero exponent field. Exponents outside the
/// biased range are a checked error, never a silent wrap.
pub fn pack_group(grp: &BfpGroup, e_bits: u32) -> Result<PackedGroupImage> {
    if e_bits == 0 || e_bits > 31 {
        return Err(Error::InvalidConfig(format!(
            "exponent width {e_bits} out of range"
        )));
    }
    let bias = 1i64 << (e_bits - 1);
    let stored_exp = if grp.is_zero() {
        0u64
    } else {
        let biased = i64::from(grp.shared_exponent()) + bias;
        if biased < 0 || biased >= (1i64 << e_bits) {
            return Err(Error::ExponentOverflow {
                exponent: grp.shared_exponent(),
                e_bits,
            });
        }
        biased as u64
    };

    let m = grp.mantissa_bits();
    let planes = m / CHUNK_BITS;
    let mut w = BitWriter::new();
    w.put(stored_exp, e_bits);
    for k in 0..planes {
        let shift = m - CHUNK_BITS - CHUNK_BITS * k;
        for i in 0..grp.group_size() {
            let chunkbits = (grp.mantissas()[i] >> shift) & 0b11;
            let signbit = u64::from(grp.signs()[i] == Sign::Minus);
            w.put(u64::from(chunkbits) | (signbit << 2), 3);
        }
    }
    Ok(PackedGroupImage {
        e_bits,
        group_size: grp.group_size(),
        mantissa_bits: m,
        bits: w.finish(),
    })
}

/// Exact inverse of [`pack_group`].
pub fn unpack_group(img: &PackedGroupImage) -> Result<BfpGroup> {
    let expect_bytes = img.bit_len().div_ceil(8) as usize;
    if img.bits.len() != expect_bytes {
        return Err(Error::MalformedImage(format!(
            "image holds {} bytes, layout needs {expect_bytes}",
            img.bits.len()
        )));
    }
    let mut r = BitReader::new(&img.bits);
    let bias = 1i64 << (img.e_bits - 1);
    let stored_exp = r.take(img.e_bits) as i64;
    let planes = img.mantissa_bits / CHUNK_BITS;
    let mut mantissas = vec![0u32; img.group_size];
    let mut signs = vec![Sign::Plus; img.group_size];
    for k in 0..planes {
        let shift = img.mantissa_bits - CHUNK_BITS - CHUNK_BITS * k;
        for i in 0..img.group_size {
            let entry = r.take(3) as u32;
            mantissas[i] |= (entry & 0b11) << shift;
            if k == 0 {
                signs[i] = Sign::from_is_negative(entry & 0b100 != 0);
            }
        }
    }
    let exponent = if mantissas.iter().all(|&v| v == 0) {
        ZERO_EXPONENT
    } else {
        (stored_exp - bias) as i32
    };
    BfpGroup::new(exponent, img.mantissa_bits, signs, mantissas)
}

const MAGIC: &[u8; 8] = b"FASTBFP1";

/// Serialized tensor metadata stored alongside a container when the groups
/// came from a tensor (shape and grouping axis are not part of the binary
/// layout).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TensorSidecar {
    pub shape: Vec<usize>,
    pub group_axis: usize,
}

/// Write a `FASTBFP1` container: magic, then `e, g, m, group count` as
/// 32-bit little-endian words, then one byte-aligned packed image per group.
pub fn write_container<W: Write>(
    out: &mut W,
    e_bits: u32,
    g: usize,
    m: u32,
    groups: &[BfpGroup],
) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&e_bits.to_le_bytes())?;
    out.write_all(&(g as u32).to_le_bytes())?;
    out.write_all(&m.to_le_bytes())?;
    out.write_all(&(groups.len() as u32).to_le_bytes())?;
    for grp in groups {
        if grp.group_size() != g || grp.mantissa_bits() != m {
            return Err(Error::MalformedImage(
                "container metadata disagrees with group metadata".into(),
            ));
        }
        let img = pack_group(grp, e_bits)?;
        out.write_all(img.bytes())?;
    }
    Ok(())
}

/// Read back a `FASTBFP1` container.
pub fn read_container<R: Read>(input: &mut R) -> Result<(u32, usize, u32, Vec<BfpGroup>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedImage("bad magic".into()));
    }
    let mut word = [0u8; 4];
    let mut next = |input: &mut R| -> Result<u32> {
        input.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let e_bits = next(input)?;
    let g = next(input)? as usize;
    let m = next(input)?;
    let count = next(input)? as usize;
    if e_bits == 0 || e_bits > 31 || g == 0 || m == 0 {
        return Err(Error::MalformedImage("bad header fields".into()));
    }
    let bytes_per = storage_bits(e_bits, g, m).div_ceil(8) as usize;
    let mut groups = Vec::with_capacity(count);
    for _ in 0..count {
        let mut buf = vec![0u8; bytes_per];
        input.read_exact(&mut buf)?;
        let img = PackedGroupImage {
            e_bits,
            group_size: g,
            mantissa_bits: m,
            bits: buf,
        };
        groups.push(unpack_group(&img)?);
    }
    Ok((e_bits, g, m, groups))
}

/// Write a quantized tensor as container + JSON sidecar (`<path>.json`).
pub fn write_tensor_file(path: &Path, tensor: &BfpTensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_container(
        &mut f,
        tensor.exponent_bits(),
        tensor.group_size(),
        tensor.mantissa_bits(),
        tensor.groups(),
    )?;
    let sidecar = TensorSidecar {
        shape: tensor.shape().to_vec(),
        group_axis: tensor.group_axis(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read a container + sidecar back into a [`BfpTensor`].
pub fn read_tensor_file(path: &Path) -> Result<BfpTensor> {
    let mut f = std::fs::File::open(path)?;
    let (e_bits, g, m, groups) = read_container(&mut f)?;
    let sidecar: TensorSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    from_groups(sidecar.shape, sidecar.group_axis, g, m, e_bits, groups)
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfp::{quantize_group, NoiseSource, RoundingMode};
    use proptest::prelude::*;

    #[test]
    fn storage_bits_formula() {
        assert_eq!(storage_bits(3, 16, 2), 51);
        assert_eq!(storage_bits(3, 16, 4), 99);
        assert_eq!(storage_bits(4, 1, 2), 7);
        // bits per value to one decimal: 3.2 and 6.2
        assert!((51.0 / 16.0 - 3.1875f64).abs() < 1e-12);
        assert!((99.0 / 16.0 - 6.1875f64).abs() < 1e-12);
    }

    #[test]
    fn pack_reports_exponent_overflow() {
        let grp = BfpGroup::new(9, 2, vec![Sign::Plus], vec![0b10]).unwrap();
        assert!(matches!(
            pack_group(&grp, 3),
            Err(Error::ExponentOverflow { exponent: 9, e_bits: 3 })
        ));
        // e=3 covers [-4, 3]
        let grp = BfpGroup::new(3, 2, vec![Sign::Plus], vec![0b10]).unwrap();
        assert!(pack_group(&grp, 3).is_ok());
        let grp = BfpGroup::new(-4, 2, vec![Sign::Plus], vec![0b10]).unwrap();
        assert!(pack_group(&grp, 3).is_ok());
        let grp = BfpGroup::new(-5, 2, vec![Sign::Plus], vec![0b10]).unwrap();
        assert!(pack_group(&grp, 3).is_err());
    }

    #[test]
    fn zero_group_roundtrips() {
        let z = BfpGroup::zero(16, 4);
        let img = pack_group(&z, 3).unwrap();
        assert_eq!(unpack_group(&img).unwrap(), z);
        assert!(img.bytes().iter().all(|&b| b == 0));
    }

    #[test]
    fn image_length_matches_formula() {
        let grp = quantize_group(
            &[1.0, -2.0, 0.5],
            16,
            4,
            RoundingMode::Truncate,
            &NoiseSource::new(0),
            0,
        )
        .unwrap();
        let img = pack_group(&grp, 3).unwrap();
        assert_eq!(img.bit_len(), 99);
        assert_eq!(img.bytes().len(), 13);
    }

    #[test]
    fn prefix_plane_is_the_truncated_m2_group() {
        let vals: Vec<f32> = (0..16).map(|i| ((i * 37) as f32 * 0.11).sin() * 4.0).collect();
        let noise = NoiseSource::new(5);
        let g4 = quantize_group(&vals, 16, 4, RoundingMode::Truncate, &noise, 0).unwrap();
        let g2 = quantize_group(&vals, 16, 2, RoundingMode::Truncate, &noise, 0).unwrap();
        let img4 = pack_group(&g4, 3).unwrap();
        let m2_view = img4.truncate_to_m2();
        let unpacked = unpack_group(&m2_view).unwrap();
        assert_eq!(unpacked, g2);
    }

    #[test]
    fn malformed_length_rejected() {
        let grp = BfpGroup::zero(4, 2);
        let mut img = pack_group(&grp, 3).unwrap();
        img.bits.push(0);
        assert!(matches!(
            unpack_group(&img),
            Err(Error::MalformedImage(_))
        ));
    }

    fn arb_group(g: usize, m: u32) -> impl Strategy<Value = BfpGroup> {
        (
            proptest::collection::vec(0u32..(1 << m), g),
            proptest::collection::vec(any::<bool>(), g),
            -4i32..4,
        )
            .prop_map(move |(mantissas, negs, exp)| {
                let signs = negs.iter().map(|&n| Sign::from_is_negative(n)).collect();
                BfpGroup::new(exp, m, signs, mantissas).unwrap()
            })
    }

    proptest! {
        #[test]
        fn roundtrip_identity_g16(grp in arb_group(16, 4)) {
            let img = pack_group(&grp, 3).unwrap();
            prop_assert_eq!(unpack_group(&img).unwrap(), grp);
        }

        #[test]
        fn roundtrip_identity_small(grp in arb_group(3, 2)) {
            let img = pack_group(&grp, 4).unwrap();
            prop_assert_eq!(unpack_group(&img).unwrap(), grp);
        }
    }

    #[test]
    fn exhaustive_roundtrip_tiny_groups() {
        // g=2, m=2: every mantissa/sign/exponent combination
        for exp in -4..=3 {
            for m0 in 0..4u32 {
                for m1 in 0..4u32 {
                    for s in 0..4u8 {
                        let signs = vec![
                            Sign::from_is_negative(s & 1 != 0),
                            Sign::from_is_negative(s & 2 != 0),
                        ];
                        let grp = BfpGroup::new(exp, 2, signs, vec![m0, m1]).unwrap();
                        let img = pack_group(&grp, 3).unwrap();
                        assert_eq!(unpack_group(&img).unwrap(), grp);
                    }
                }
            }
        }
    }

    #[test]
    fn container_roundtrip() {
        let noise = NoiseSource::new(1);
        let groups: Vec<BfpGroup> = (0..5)
            .map(|k| {
                let vals: Vec<f32> =
                    (0..16).map(|i| ((k * 16 + i) as f32 * 0.23).cos() * 2.0).collect();
                quantize_group(&vals, 16, 4, RoundingMode::Truncate, &noise, k as u64).unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_container(&mut buf, 3, 16, 4, &groups).unwrap();
        assert_eq!(&buf[..8], b"FASTBFP1");
        let (e, g, m, back) = read_container(&mut buf.as_slice()).unwrap();
        assert_eq!((e, g, m), (3, 16, 4));
        assert_eq!(back, groups);
    }
}
