//! The experiment runner: deterministic seeded training of a desk-scale
//! model with every matrix product routed through the systolic simulator,
//! loss curves, validation accuracy, precision traces, and cumulative cost.

use super::data::{digits, two_moons_lifted, BatchPlan, Dataset, MOON_FEATURES};
use super::model::{
    accuracy, softmax_cross_entropy, CostTotals, Engine, LayerPrecision, Model, ModelKind,
    WeightStorage,
};
use super::schedule::Schedule;
use crate::bfp::RoundingMode;
use crate::error::{Error, Result};
use crate::precision::{
    decide, relative_improvement, threshold, PrecisionSetting, PrecisionTrace, TensorKind,
    ThresholdParams, TraceEntry,
};
use crate::systolic::{ArrayConfig, CostModelParams, Simulator};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// The bundled desk-scale tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    /// Two interleaved half-moons lifted through fixed random Fourier
    /// features (16 inputs, 2 classes).
    TwoMoons { train: usize, val: usize },
    /// Synthetic 8x8 digit renderings, 10 classes.
    Digits { train: usize, val: usize },
}

impl Task {
    fn generate(&self, seed: u64) -> (Dataset, Dataset) {
        match *self {
            Task::TwoMoons { train, val } => (
                two_moons_lifted(train, 0.15, seed ^ 0x747261696e, seed),
                two_moons_lifted(val, 0.15, seed ^ 0x76616c, seed),
            ),
            Task::Digits { train, val } => {
                (digits(train, seed ^ 0x747261696e), digits(val, seed ^ 0x76616c))
            }
        }
    }
}

/// Everything that defines one training run. Identical configs produce
/// bit-identical run records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelKind,
    pub schedule: Schedule,
    pub weight_storage: WeightStorage,
    /// Rounding for gradient tensors (weights/activations always truncate).
    pub gradient_rounding: RoundingMode,
    pub learning_rate: f32,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub group_size: usize,
    /// Validation cadence in iterations.
    pub eval_every: usize,
    /// Re-decide adaptive precision every this many iterations.
    pub adaptive_stride: usize,
    pub array: ArrayConfig,
    pub cost_model: CostModelParams,
}

impl TrainConfig {
    /// Sensible desk-scale defaults: 4-layer MLP on two moons with a small
    /// array so stream cycles, not fill/drain skew, dominate.
    pub fn two_moons_mlp(schedule: Schedule, seed: u64) -> Self {
        TrainConfig {
            task: Task::TwoMoons { train: 512, val: 512 },
            model: ModelKind::Mlp { dims: vec![MOON_FEATURES, 24, 24, 24, 2] },
            schedule,
            weight_storage: WeightStorage::Fp32Master,
            gradient_rounding: RoundingMode::stochastic_default(),
            learning_rate: 0.15,
            iterations: 400,
            batch_size: 32,
            seed,
            group_size: 16,
            eval_every: 20,
            adaptive_stride: 1,
            array: ArrayConfig { rows: 16, cols: 16, group_size: 16, clock_hz: 500e6 },
            cost_model: CostModelParams::default(),
        }
    }

    pub fn digits_cnn(schedule: Schedule, seed: u64) -> Self {
        TrainConfig {
            task: Task::Digits { train: 400, val: 200 },
            model: ModelKind::SmallCnn,
            schedule,
            weight_storage: WeightStorage::Fp32Master,
            gradient_rounding: RoundingMode::stochastic_default(),
            learning_rate: 0.05,
            iterations: 120,
            batch_size: 16,
            seed,
            group_size: 16,
            eval_every: 20,
            adaptive_stride: 1,
            array: ArrayConfig { rows: 16, cols: 16, group_size: 16, clock_hz: 500e6 },
            cost_model: CostModelParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.iterations == 0 || self.batch_size == 0 || self.group_size == 0 {
            return Err(Error::InvalidConfig(
                "iterations, batch size, and group size must be positive".into(),
            ));
        }
        if self.eval_every == 0 || self.adaptive_stride == 0 {
            return Err(Error::InvalidConfig(
                "eval_every and adaptive_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One validation measurement with the cost state at that point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValPoint {
    pub iteration: usize,
    pub accuracy: f64,
    pub cum_cycles: u64,
    pub cum_energy_j: f64,
    pub cum_passes: u64,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub seed: u64,
    pub losses: Vec<f32>,
    pub val_points: Vec<ValPoint>,
    pub trace: PrecisionTrace,
    pub cost: CostTotals,
    pub diverged: bool,
    pub final_accuracy: f64,
}

impl RunRecord {
    /// CSV rows `iteration,loss,val_acc,cum_cycles,cum_energy`; the
    /// accuracy column repeats the latest measured value.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("iteration,loss,val_acc,cum_cycles,cum_energy\n");
        let mut vp = self.val_points.iter().peekable();
        let mut acc = f64::NAN;
        let mut cycles = 0u64;
        let mut energy = 0f64;
        for (idx, loss) in self.losses.iter().enumerate() {
            let iteration = idx + 1;
            while let Some(p) = vp.peek() {
                if p.iteration <= iteration {
                    acc = p.accuracy;
                    cycles = p.cum_cycles;
                    energy = p.cum_energy_j;
                    vp.next();
                } else {
                    break;
                }
            }
            out.push_str(&format!("{iteration},{loss},{acc},{cycles},{energy}\n"));
        }
        out
    }
}

/// Per-layer caches feeding the adaptive decision: the tensors produced by
/// the previous iteration. Weights are read at their current values.
struct AdaptiveCache {
    last_activation: Option<Tensor>,
    last_gradient: Option<Tensor>,
    last_setting: Option<PrecisionSetting>,
}

/// Run one experiment to completion (or divergence).
pub fn run_experiment(cfg: &TrainConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let (train, val) = cfg.task.generate(cfg.seed);
    let mut model = Model::build(&cfg.model, cfg.seed);
    let depth = model.depth();
    let sim = Simulator::new(cfg.array, cfg.cost_model);
    let mut engine = Engine::new(&sim, cfg.seed, cfg.gradient_rounding, cfg.group_size);
    let mut plan = BatchPlan::new(train.len(), cfg.batch_size, cfg.seed ^ 0x62617463);
    let mut trace = PrecisionTrace::new();
    let mut caches: Vec<AdaptiveCache> = (0..depth)
        .map(|_| AdaptiveCache {
            last_activation: None,
            last_gradient: None,
            last_setting: None,
        })
        .collect();

    let thresholds = match cfg.schedule {
        Schedule::FastAdaptive { alpha, beta } => Some(ThresholdParams {
            alpha,
            beta,
            total_iterations: cfg.iterations,
            total_layers: depth,
        }),
        _ => None,
    };

    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut val_points = Vec::new();
    let mut diverged = false;

    for i in 1..=cfg.iterations {
        // decide this iteration's precision per layer
        let mut precisions = Vec::with_capacity(depth);
        for l in 1..=depth {
            let prec = match cfg.schedule.resolve_static(i, cfg.iterations, l, depth) {
                Some(p) => p,
                None => {
                    let params = thresholds.as_ref().unwrap();
                    let cache = &mut caches[l - 1];
                    if (i - 1) % cfg.adaptive_stride != 0 {
                        if let Some(s) = cache.last_setting {
                            precisions.push(LayerPrecision::Bfp(s));
                            continue;
                        }
                    }
                    let eps = threshold(l, i, params)?;
                    let r_w = relative_improvement(model.weights(l - 1), 0, cfg.group_size)?;
                    let r_a = match &cache.last_activation {
                        Some(a) => relative_improvement(a, 1, cfg.group_size)?,
                        None => 0.0,
                    };
                    let r_g = match &cache.last_gradient {
                        Some(gt) => relative_improvement(gt, 1, cfg.group_size)?,
                        None => 0.0,
                    };
                    let setting = PrecisionSetting {
                        m_w: decide(r_w, eps),
                        m_a: decide(r_a, eps),
                        m_g: decide(r_g, eps),
                    };
                    for (kind, r, m) in [
                        (TensorKind::Weight, r_w, setting.m_w),
                        (TensorKind::Activation, r_a, setting.m_a),
                        (TensorKind::Gradient, r_g, setting.m_g),
                    ] {
                        trace.record(TraceEntry {
                            iteration: i,
                            layer: l,
                            kind,
                            r,
                            epsilon: eps,
                            chosen_m: m,
                        });
                    }
                    cache.last_setting = Some(setting);
                    LayerPrecision::Bfp(setting)
                }
            };
            precisions.push(prec);
        }

        let indices = plan.next_batch();
        let (x, labels) = train.batch(&indices);
        let logits = model.forward(&x, &mut engine, &precisions, i)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &labels);
        losses.push(loss);
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        model.backward(&dlogits, &mut engine, &precisions, i)?;

        if thresholds.is_some() {
            for l in 0..depth {
                caches[l].last_activation = model.cached_input(l).cloned();
                caches[l].last_gradient = model.output_gradient(l).cloned();
            }
        }

        model.step(cfg.learning_rate, cfg.weight_storage, cfg.group_size)?;

        if i % cfg.eval_every == 0 || i == cfg.iterations {
            let acc = evaluate(&mut model, &mut engine, &val, &precisions, i)?;
            val_points.push(ValPoint {
                iteration: i,
                accuracy: acc,
                cum_cycles: engine.totals.cycles,
                cum_energy_j: engine.totals.energy_j,
                cum_passes: engine.totals.passes,
            });
        }
    }

    let final_accuracy = val_points.last().map(|p| p.accuracy).unwrap_or(0.0);
    Ok(RunRecord {
        label: cfg.schedule.label(),
        seed: cfg.seed,
        losses,
        val_points,
        trace,
        cost: engine.totals,
        diverged,
        final_accuracy,
    })
}

fn evaluate(
    model: &mut Model,
    engine: &mut Engine,
    val: &Dataset,
    precisions: &[LayerPrecision],
    iteration: usize,
) -> Result<f64> {
    // validation reuses the training precision but costs nothing: snapshot
    // and restore the cost counters around it
    let saved = engine.totals;
    let all: Vec<usize> = (0..val.len()).collect();
    let (x, labels) = val.batch(&all);
    let logits = model.forward(&x, engine, precisions, iteration)?;
    engine.totals = saved;
    Ok(accuracy(&logits, &labels))
}

/// One row of a time-to-accuracy table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TtaRow {
    pub label: String,
    pub seed: u64,
    /// Simulated cycles when validation first reached the target; `None`
    /// means the run never got there.
    pub tta_cycles: Option<u64>,
    /// Relative to the fastest run that reached the target.
    pub normalized: Option<f64>,
}

/// First simulated time each run reaches `target` validation accuracy.
pub fn time_to_accuracy(records: &[RunRecord], target: f64) -> Vec<TtaRow> {
    let mut rows: Vec<TtaRow> = records
        .iter()
        .map(|rec| {
            let tta = rec
                .val_points
                .iter()
                .find(|p| p.accuracy >= target)
                .map(|p| p.cum_cycles);
            TtaRow {
                label: rec.label.clone(),
                seed: rec.seed,
                tta_cycles: tta,
                normalized: None,
            }
        })
        .collect();
    let best = rows.iter().filter_map(|r| r.tta_cycles).min();
    if let Some(best) = best {
        for row in &mut rows {
            row.normalized = row.tta_cycles.map(|t| t as f64 / best.max(1) as f64);
        }
    }
    rows
}

/// Render a TTA table as CSV; unreached targets print `N/A`.
pub fn tta_csv(rows: &[TtaRow]) -> String {
    let mut out = String::from("schedule,seed,tta_cycles,normalized\n");
    for r in rows {
        match (r.tta_cycles, r.normalized) {
            (Some(t), Some(n)) => out.push_str(&format!("{},{},{},{:.4}\n", r.label, r.seed, t, n)),
            _ => out.push_str(&format!("{},{},N/A,N/A\n", r.label, r.seed)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(schedule: Schedule, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::two_moons_mlp(schedule, seed);
        cfg.iterations = 30;
        cfg.task = Task::TwoMoons { train: 128, val: 128 };
        cfg.eval_every = 10;
        cfg
    }

    #[test]
    fn identical_configs_give_bit_identical_records() {
        let cfg = quick(Schedule::FixedBfp { m: 4 }, 3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.cost.cycles, b.cost.cycles);
        assert_eq!(a.cost.energy_j, b.cost.energy_j);
        assert_eq!(
            a.val_points.iter().map(|p| p.accuracy).collect::<Vec<_>>(),
            b.val_points.iter().map(|p| p.accuracy).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fp32_schedule_reports_no_conversions_or_passes() {
        let rec = run_experiment(&quick(Schedule::Fp32, 1)).unwrap();
        assert_eq!(rec.cost.passes, 0);
        assert_eq!(rec.cost.converter_groups, 0);
        assert!(rec.cost.cycles > 0);
        assert!(!rec.diverged);
    }

    #[test]
    fn adaptive_schedule_records_trace_rows() {
        let rec = run_experiment(&quick(
            Schedule::FastAdaptive { alpha: 0.6, beta: 0.3 },
            2,
        ))
        .unwrap();
        // 30 iterations x 4 layers x 3 kinds
        assert_eq!(rec.trace.len(), 30 * 4 * 3);
        let csv = rec.trace.to_csv();
        assert!(csv.lines().count() == 1 + 30 * 4 * 3);
    }

    #[test]
    fn curves_csv_has_one_row_per_iteration() {
        let rec = run_experiment(&quick(Schedule::FixedBfp { m: 2 }, 5)).unwrap();
        let csv = rec.curves_csv();
        assert_eq!(csv.lines().count(), 1 + 30);
    }

    #[test]
    fn tta_handles_unreachable_targets() {
        let rec = run_experiment(&quick(Schedule::FixedBfp { m: 4 }, 7)).unwrap();
        let rows = time_to_accuracy(&[rec.clone()], 2.0); // accuracy > 1 is impossible
        assert!(rows[0].tta_cycles.is_none());
        assert!(tta_csv(&rows).contains("N/A"));
        let rows = time_to_accuracy(&[rec], 0.0);
        assert!(rows[0].tta_cycles.is_some());
        assert_eq!(rows[0].normalized, Some(1.0));
    }
}
