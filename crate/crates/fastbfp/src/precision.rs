//! Adaptive precision selection: the relative-improvement metric of using
//! 4-bit over 2-bit mantissas, the layer/iteration threshold schedule, and
//! the per-tensor 2-vs-4-bit decision, plus the trace log behind the
//! precision heatmap.

use crate::bfp::{quantize_tensor, NoiseSource, RoundingMode};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Threshold schedule parameters: `epsilon(l, i) = alpha - beta*i/I - beta*l/L`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub alpha: f64,
    pub beta: f64,
    pub total_iterations: usize,
    pub total_layers: usize,
}

impl ThresholdParams {
    pub fn new(total_iterations: usize, total_layers: usize) -> Self {
        ThresholdParams {
            alpha: 0.6,
            beta: 0.3,
            total_iterations,
            total_layers,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.total_iterations == 0 || self.total_layers == 0 {
            return Err(Error::InvalidConfig(
                "threshold schedule needs I >= 1 and L >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which tensor a decision applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorKind {
    Weight,
    Activation,
    Gradient,
}

impl TensorKind {
    pub fn short(&self) -> &'static str {
        match self {
            TensorKind::Weight => "W",
            TensorKind::Activation => "A",
            TensorKind::Gradient => "G",
        }
    }
}

/// Mantissa widths for (weights, activations, gradients), each 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionSetting {
    pub m_w: u32,
    pub m_a: u32,
    pub m_g: u32,
}

impl PrecisionSetting {
    pub fn uniform(m: u32) -> Self {
        PrecisionSetting {
            m_w: m,
            m_a: m,
            m_g: m,
        }
    }

    /// All eight settings in (W, A, G) lexicographic order.
    pub fn all() -> [PrecisionSetting; 8] {
        let mut out = [PrecisionSetting::uniform(2); 8];
        let mut idx = 0;
        for &m_w in &[2, 4] {
            for &m_a in &[2, 4] {
                for &m_g in &[2, 4] {
                    out[idx] = PrecisionSetting { m_w, m_a, m_g };
                    idx += 1;
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("({},{},{})", self.m_w, self.m_a, self.m_g)
    }
}

/// Relative improvement of 4-bit over 2-bit quantization:
/// `sum |BFP(X,4) - BFP(X,2)| / sum |BFP(X,2)|`, both under deterministic
/// truncation so the decision is reproducible.
///
/// A zero denominator with a positive numerator returns +inf (forces high
/// precision); an all-zero tensor returns 0.
pub fn relative_improvement(x: &Tensor, axis: usize, g: usize) -> Result<f64> {
    let noise = NoiseSource::new(0); // unused under Truncate
    let q2 = quantize_tensor(x, axis, g, 2, RoundingMode::Truncate, &noise)?;
    let q4 = quantize_tensor(x, axis, g, 4, RoundingMode::Truncate, &noise)?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (g2, g4) in q2.groups().iter().zip(q4.groups()) {
        let d2 = g2.dequantize_f64();
        let d4 = g4.dequantize_f64();
        for (a, b) in d2.iter().zip(&d4) {
            num += (b - a).abs();
            den += a.abs();
        }
    }
    if den == 0.0 {
        return Ok(if num > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(num / den)
}

/// Evaluate the threshold at 1-based layer `l` and iteration `i`.
pub fn threshold(l: usize, i: usize, p: &ThresholdParams) -> Result<f64> {
    p.validate()?;
    if l < 1 || l > p.total_layers || i < 1 || i > p.total_iterations {
        return Err(Error::OutOfRangeIndex(format!(
            "(l={l}, i={i}) outside 1..={} x 1..={}",
            p.total_layers, p.total_iterations
        )));
    }
    Ok(p.alpha
        - p.beta * i as f64 / p.total_iterations as f64
        - p.beta * l as f64 / p.total_layers as f64)
}

/// Pick the mantissa width for one tensor: 2 when the relative improvement
/// falls below the threshold, otherwise 4.
pub fn select_precision(x: &Tensor, axis: usize, g: usize, l: usize, i: usize, p: &ThresholdParams) -> Result<u32> {
    let r = relative_improvement(x, axis, g)?;
    Ok(decide(r, threshold(l, i, p)?))
}

/// The decision rule on a precomputed improvement value.
pub fn decide(r: f64, epsilon: f64) -> u32 {
    if r < epsilon {
        2
    } else {
        4
    }
}

/// One evaluated decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub layer: usize,
    pub kind: TensorKind,
    pub r: f64,
    pub epsilon: f64,
    pub chosen_m: u32,
}

/// Append-only log of precision decisions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PrecisionTrace {
    entries: Vec<TraceEntry>,
}

impl PrecisionTrace {
    pub fn new() -> Self {
        PrecisionTrace::default()
    }

    pub fn record(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV rows sorted by (iteration, layer, kind).
    pub fn to_csv(&self) -> String {
        let mut rows = self.entries.clone();
        rows.sort_by_key(|e| (e.iteration, e.layer, e.kind.short()));
        let mut out = String::from("iteration,layer,tensor_kind,r,epsilon,chosen_m\n");
        for e in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.iteration,
                e.layer,
                e.kind.short(),
                e.r,
                e.epsilon,
                e.chosen_m
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::MalformedImage(format!("trace row {n}: {line}")));
            }
            let kind = match f[2] {
                "W" => TensorKind::Weight,
                "A" => TensorKind::Activation,
                "G" => TensorKind::Gradient,
                other => {
                    return Err(Error::MalformedImage(format!("bad tensor kind {other}")));
                }
            };
            let parse_err = |what: &str| Error::MalformedImage(format!("trace row {n}: bad {what}"));
            entries.push(TraceEntry {
                iteration: f[0].parse().map_err(|_| parse_err("iteration"))?,
                layer: f[1].parse().map_err(|_| parse_err("layer"))?,
                kind,
                r: f[3].parse().map_err(|_| parse_err("r"))?,
                epsilon: f[4].parse().map_err(|_| parse_err("epsilon"))?,
                chosen_m: f[5].parse().map_err(|_| parse_err("chosen_m"))?,
            });
        }
        Ok(PrecisionTrace { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_endpoints() {
        let p = ThresholdParams::new(100, 10);
        // i -> 0, l -> 0 limit is alpha; the smallest evaluable point is close
        let p_big = ThresholdParams::new(1_000_000, 1_000_000);
        assert!((threshold(1, 1, &p_big).unwrap() - 0.6).abs() < 1e-5);
        // endpoint at (L, I) is alpha - 2 beta = 0
        assert!(threshold(10, 100, &p).unwrap().abs() < 1e-12);
        // midpoint
        assert!((threshold(5, 50, &p).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_rejects_out_of_range() {
        let p = ThresholdParams::new(10, 5);
        assert!(threshold(0, 1, &p).is_err());
        assert!(threshold(1, 0, &p).is_err());
        assert!(threshold(6, 1, &p).is_err());
        assert!(threshold(1, 11, &p).is_err());
    }

    #[test]
    fn threshold_strictly_decreases() {
        let p = ThresholdParams::new(50, 8);
        for l in 1..8 {
            for i in 1..50 {
                let here = threshold(l, i, &p).unwrap();
                assert!(threshold(l + 1, i, &p).unwrap() < here);
                assert!(threshold(l, i + 1, &p).unwrap() < here);
            }
        }
    }

    #[test]
    fn improvement_zero_when_m2_is_exact() {
        // group max 4.0 -> m=2 ulp is 2.0; multiples of it quantize exactly
        let t = Tensor::matrix(1, 4, vec![2.0, 4.0, 4.0, 2.0]).unwrap();
        assert_eq!(relative_improvement(&t, 1, 4).unwrap(), 0.0);
    }

    #[test]
    fn improvement_hand_computed_case() {
        // one group [8, 1]: BFP2 -> [8, 0], BFP4 -> [8, 1], r = 1/8
        let t = Tensor::matrix(1, 2, vec![8.0, 1.0]).unwrap();
        let r = relative_improvement(&t, 1, 2).unwrap();
        assert!((r - 0.125).abs() < 1e-12);
    }

    #[test]
    fn improvement_zero_tensor() {
        let t = Tensor::zeros(&[2, 8]);
        assert_eq!(relative_improvement(&t, 1, 8).unwrap(), 0.0);
    }

    #[test]
    fn improvement_nonnegative_and_scale_covariant() {
        let data: Vec<f32> = (0..64).map(|i| ((i as f32) * 0.771).sin() * 3.0).collect();
        let t = Tensor::matrix(2, 32, data.clone()).unwrap();
        let r = relative_improvement(&t, 1, 16).unwrap();
        assert!(r >= 0.0);
        for scale in [0.25f32, 2.0, 1024.0] {
            let scaled =
                Tensor::matrix(2, 32, data.iter().map(|v| v * scale).collect()).unwrap();
            let rs = relative_improvement(&scaled, 1, 16).unwrap();
            assert!((rs - r).abs() < 1e-12, "scale {scale}: {rs} vs {r}");
        }
    }

    #[test]
    fn decision_thresholding() {
        let t = Tensor::matrix(1, 2, vec![8.0, 1.0]).unwrap(); // r = 0.125
        let mut p = ThresholdParams::new(2, 2);
        // pick points where epsilon is 0.3 and 0.1
        p.alpha = 0.3 + 0.3;
        assert_eq!(select_precision(&t, 1, 2, 1, 1, &p).unwrap(), 2); // eps(1,1)=0.3
        p.alpha = 0.1 + 0.3;
        assert_eq!(select_precision(&t, 1, 2, 1, 1, &p).unwrap(), 4); // eps(1,1)=0.1
    }

    #[test]
    fn decision_monotone_in_schedule() {
        // once 4 is chosen at (l, i), later (l', i') also choose 4
        let p = ThresholdParams::new(40, 6);
        let mut state = 7u64;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = ((state >> 11) as f64 / (1u64 << 53) as f64) * 0.8;
            let l = 1 + (state >> 7) as usize % 6;
            let i = 1 + (state >> 17) as usize % 40;
            if decide(r, threshold(l, i, &p).unwrap()) == 4 {
                for (l2, i2) in [(l, i), (6, i), (l, 40), (6, 40)] {
                    assert_eq!(decide(r, threshold(l2, i2, &p).unwrap()), 4);
                }
            }
        }
    }

    #[test]
    fn trace_roundtrips_through_csv() {
        let mut trace = PrecisionTrace::new();
        trace.record(TraceEntry {
            iteration: 2,
            layer: 1,
            kind: TensorKind::Gradient,
            r: 0.25,
            epsilon: 0.3,
            chosen_m: 2,
        });
        trace.record(TraceEntry {
            iteration: 1,
            layer: 1,
            kind: TensorKind::Weight,
            r: 0.5,
            epsilon: 0.3,
            chosen_m: 4,
        });
        assert_eq!(trace.len(), 2);
        let csv = trace.to_csv();
        // sorted by iteration first
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].starts_with("1,1,W"));
        assert!(lines[2].starts_with("2,1,G"));
        let back = PrecisionTrace::from_csv(&csv).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.entries()[0].chosen_m, 4);
    }

    #[test]
    fn all_settings_enumerates_eight() {
        let all = PrecisionSetting::all();
        assert_eq!(all.len(), 8);
        let labels: std::collections::HashSet<String> =
            all.iter().map(|s| s.label()).collect();
        assert_eq!(labels.len(), 8);
    }
}
