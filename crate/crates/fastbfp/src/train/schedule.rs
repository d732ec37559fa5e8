//! Precision schedules: fixed baselines, the four switch-at-half schemes,
//! and the adaptive rule driven by relative improvement.

use super::model::LayerPrecision;
use crate::precision::PrecisionSetting;
use serde::{Deserialize, Serialize};

/// How per-layer precision evolves over training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Full-precision baseline; no quantization anywhere.
    Fp32,
    /// One BFP mantissa width for every tensor, every layer, all run long.
    FixedBfp { m: u32 },
    /// Low-precision BFP for the first half of the iterations, FP32 after.
    TemporalLowToHigh { m_low: u32 },
    /// FP32 first, low-precision BFP for the second half.
    TemporalHighToLow { m_low: u32 },
    /// Low-precision BFP for the shallow half of the layers, FP32 deeper.
    LayerwiseLowToHigh { m_low: u32 },
    /// FP32 for the shallow half, low-precision BFP deeper.
    LayerwiseHighToLow { m_low: u32 },
    /// Per-tensor 2-vs-4-bit decisions from the threshold rule.
    FastAdaptive { alpha: f64, beta: f64 },
}

impl Schedule {
    pub fn label(&self) -> String {
        match self {
            Schedule::Fp32 => "fp32".into(),
            Schedule::FixedBfp { m } => format!("fixed-bfp{m}"),
            Schedule::TemporalLowToHigh { .. } => "temporal-low-to-high".into(),
            Schedule::TemporalHighToLow { .. } => "temporal-high-to-low".into(),
            Schedule::LayerwiseLowToHigh { .. } => "layerwise-low-to-high".into(),
            Schedule::LayerwiseHighToLow { .. } => "layerwise-high-to-low".into(),
            Schedule::FastAdaptive { .. } => "fast-adaptive".into(),
        }
    }

    /// Resolve the non-adaptive schedules. `i` and `l` are 1-based;
    /// temporal switches happen after `I/2`, layerwise at `L/2`.
    /// Returns `None` for [`Schedule::FastAdaptive`], whose decision needs
    /// tensor contents.
    pub fn resolve_static(
        &self,
        i: usize,
        total_iterations: usize,
        l: usize,
        total_layers: usize,
    ) -> Option<LayerPrecision> {
        let low = |m: u32| LayerPrecision::Bfp(PrecisionSetting::uniform(m));
        match *self {
            Schedule::Fp32 => Some(LayerPrecision::Fp32),
            Schedule::FixedBfp { m } => Some(low(m)),
            Schedule::TemporalLowToHigh { m_low } => Some(if i <= total_iterations / 2 {
                low(m_low)
            } else {
                LayerPrecision::Fp32
            }),
            Schedule::TemporalHighToLow { m_low } => Some(if i <= total_iterations / 2 {
                LayerPrecision::Fp32
            } else {
                low(m_low)
            }),
            Schedule::LayerwiseLowToHigh { m_low } => Some(if l <= total_layers / 2 {
                low(m_low)
            } else {
                LayerPrecision::Fp32
            }),
            Schedule::LayerwiseHighToLow { m_low } => Some(if l <= total_layers / 2 {
                LayerPrecision::Fp32
            } else {
                low(m_low)
            }),
            Schedule::FastAdaptive { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temporal_switches_at_half() {
        let s = Schedule::TemporalLowToHigh { m_low: 2 };
        assert_eq!(
            s.resolve_static(5, 10, 1, 4),
            Some(LayerPrecision::Bfp(PrecisionSetting::uniform(2)))
        );
        assert_eq!(s.resolve_static(6, 10, 1, 4), Some(LayerPrecision::Fp32));
        let s = Schedule::TemporalHighToLow { m_low: 2 };
        assert_eq!(s.resolve_static(5, 10, 1, 4), Some(LayerPrecision::Fp32));
    }

    #[test]
    fn layerwise_switches_at_half_depth() {
        let s = Schedule::LayerwiseLowToHigh { m_low: 2 };
        assert_eq!(
            s.resolve_static(1, 10, 2, 4),
            Some(LayerPrecision::Bfp(PrecisionSetting::uniform(2)))
        );
        assert_eq!(s.resolve_static(1, 10, 3, 4), Some(LayerPrecision::Fp32));
    }

    #[test]
    fn adaptive_defers() {
        let s = Schedule::FastAdaptive { alpha: 0.6, beta: 0.3 };
        assert_eq!(s.resolve_static(1, 10, 1, 4), None);
    }
}
