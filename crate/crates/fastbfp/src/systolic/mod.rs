//! Functional-plus-cost simulation of the 2D fMAC array in its three
//! dataflow modes.
//!
//! All three matrix operations reduce to one group contraction
//! `out[p][q] = sum_rg dot(left.group(p, rg), right.group(q, rg))` over
//! co-aligned BFP groups; the mode fixes which operand axes are grouped,
//! so transposed operands are consumed by indexing alone — no transposed
//! copy is ever materialized. Outputs are bit-identical to a reference
//! fold of `bfp_dot` results accumulated in f32 in ascending group order;
//! tiling buffers per-output partials between reduction tiles and
//! continues the same accumulation chain.
//!
//! In hardware the weight update folds into the grad-W drain stage; here
//! the drain carries no extra cost and the arithmetic itself is owned by
//! the training step.

mod cost;

pub use cost::{ArrayConfig, CostModelParams, CostReport, TileCost};

use crate::bfp::BfpTensor;
use crate::error::{Error, Result};
use crate::fmac::{bfp_dot, pass_count, FpAccumulator};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// The three matrix operations of one training layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataflowMode {
    /// `O = A x W`; weights stationary, activations stream from below.
    Forward,
    /// `grad_A = grad_O x W^T`; weights stationary, gradients stream from
    /// the left, outputs exit at the top.
    GradA,
    /// `grad_W = A^T x grad_O`; accumulation stationary, both operands
    /// stream, cells drain once.
    GradW,
}

/// A matrix-operation descriptor: mode, operands, and implied precisions.
#[derive(Debug, Clone, Copy)]
pub struct SystolicJob<'a> {
    pub mode: DataflowMode,
    left: &'a BfpTensor,
    right: &'a BfpTensor,
}

fn expect_rank2_axis(t: &BfpTensor, axis: usize, what: &str) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "{what} must be rank 2, got {:?}",
            t.shape()
        )));
    }
    if t.group_axis() != axis {
        return Err(Error::ShapeMismatch(format!(
            "{what} must be grouped along axis {axis}, got {}",
            t.group_axis()
        )));
    }
    Ok(())
}

impl<'a> SystolicJob<'a> {
    /// Forward pass: activations `[M, K]` grouped along K, weights `[K, N]`
    /// grouped along K. Output is `[M, N]`.
    pub fn forward(activations: &'a BfpTensor, weights: &'a BfpTensor) -> Result<Self> {
        expect_rank2_axis(activations, 1, "activations")?;
        expect_rank2_axis(weights, 0, "weights")?;
        let job = SystolicJob {
            mode: DataflowMode::Forward,
            left: activations,
            right: weights,
        };
        job.validate_reduction()?;
        Ok(job)
    }

    /// Activation-gradient pass: output gradients `[M, N]` grouped along N,
    /// weights `[K, N]` grouped along N. Output is `[M, K]` — the product
    /// with the transposed weights, indexed in place.
    pub fn grad_activations(output_grads: &'a BfpTensor, weights: &'a BfpTensor) -> Result<Self> {
        expect_rank2_axis(output_grads, 1, "output gradients")?;
        expect_rank2_axis(weights, 1, "weights")?;
        let job = SystolicJob {
            mode: DataflowMode::GradA,
            left: output_grads,
            right: weights,
        };
        job.validate_reduction()?;
        Ok(job)
    }

    /// Weight-gradient pass: activations `[M, K]` grouped along the batch
    /// axis, output gradients `[M, N]` grouped along the batch axis.
    /// Output is `[K, N]`.
    pub fn grad_weights(activations: &'a BfpTensor, output_grads: &'a BfpTensor) -> Result<Self> {
        expect_rank2_axis(activations, 0, "activations")?;
        expect_rank2_axis(output_grads, 0, "output gradients")?;
        let job = SystolicJob {
            mode: DataflowMode::GradW,
            left: activations,
            right: output_grads,
        };
        job.validate_reduction()?;
        Ok(job)
    }

    fn validate_reduction(&self) -> Result<()> {
        let l = self.left;
        let r = self.right;
        if l.group_size() != r.group_size() {
            return Err(Error::GroupSizeMismatch {
                left: l.group_size(),
                right: r.group_size(),
            });
        }
        let lred = l.shape()[l.group_axis()];
        let rred = r.shape()[r.group_axis()];
        if lred != rred {
            return Err(Error::ShapeMismatch(format!(
                "reduction lengths differ: {lred} vs {rred}"
            )));
        }
        Ok(())
    }

    /// Output shape `[P, Q]`.
    pub fn output_shape(&self) -> [usize; 2] {
        [self.left.outer_count(), self.right.outer_count()]
    }

    /// Groups along the reduction axis.
    pub fn reduction_groups(&self) -> usize {
        self.left.groups_per_axis()
    }

    /// fMAC passes per group-pair dot product at this job's precisions.
    pub fn passes_per_dp(&self) -> Result<u32> {
        pass_count(self.left.mantissa_bits(), self.right.mantissa_bits())
    }

    pub fn left(&self) -> &BfpTensor {
        self.left
    }

    pub fn right(&self) -> &BfpTensor {
        self.right
    }
}

/// A tile plan plus its cycle estimate.
#[derive(Debug, Clone)]
pub struct TileSchedule {
    pub mode: DataflowMode,
    pub tiles: Vec<TileCost>,
    pub cycles: u64,
    /// Packed bits read for operands plus written for the output.
    pub sram_bits: u64,
    /// Output groups converted to BFP at the accumulator output.
    pub converter_groups: u64,
}

/// Plan tiles for a job on an array.
///
/// Weight-stationary modes map (reduction groups x output columns) onto the
/// array and re-stream the moving operand once per tile; the accumulation-
/// stationary mode maps the output itself onto the array and streams the
/// whole reduction once per tile. Stream cycles scale with the pass count:
/// the array accepts a new input vector every `passes` cycles.
pub fn tile_schedule(job: &SystolicJob, cfg: &ArrayConfig, params: &CostModelParams) -> Result<TileSchedule> {
    let [p, q] = job.output_shape();
    let rg = job.reduction_groups();
    let passes = u64::from(job.passes_per_dp()?);
    let g = job.left.group_size() as u64;

    let mut tiles = Vec::new();
    let mut sram_bits = 0u64;
    if p == 0 || q == 0 || rg == 0 {
        return Ok(TileSchedule {
            mode: job.mode,
            tiles,
            cycles: 0,
            sram_bits: 0,
            converter_groups: 0,
        });
    }

    let fill = params.fill_cycles(cfg);
    let drain = params.drain_cycles(cfg);
    let stationary_bits = match job.mode {
        DataflowMode::Forward | DataflowMode::GradA => job.right.storage_bits(),
        DataflowMode::GradW => 0, // nothing pre-stored; partials live in cells
    };
    sram_bits += stationary_bits;

    match job.mode {
        DataflowMode::Forward | DataflowMode::GradA => {
            // array rows hold reduction groups, columns hold output columns
            let row_tiles = rg.div_ceil(cfg.rows);
            let col_tiles = q.div_ceil(cfg.cols);
            let stream_bits_per_tile = job.left.storage_bits();
            for ct in 0..col_tiles {
                let q_here = tile_span(q, ct, cfg.cols);
                for rt in 0..row_tiles {
                    let rg_here = tile_span(rg, rt, cfg.rows);
                    let dp = (p * q_here * rg_here) as u64;
                    tiles.push(TileCost {
                        row_tile: rt,
                        col_tile: ct,
                        dp_ops: dp,
                        passes: dp * passes,
                        fill_cycles: fill,
                        stream_cycles: p as u64 * passes,
                        drain_cycles: drain,
                    });
                    sram_bits += stream_bits_per_tile;
                }
            }
        }
        DataflowMode::GradW => {
            // array rows and columns hold the output tile; both operands stream
            let row_tiles = p.div_ceil(cfg.rows);
            let col_tiles = q.div_ceil(cfg.cols);
            let stream_bits_per_tile = job.left.storage_bits() + job.right.storage_bits();
            for rt in 0..row_tiles {
                let p_here = tile_span(p, rt, cfg.rows);
                for ct in 0..col_tiles {
                    let q_here = tile_span(q, ct, cfg.cols);
                    let dp = (p_here * q_here * rg) as u64;
                    tiles.push(TileCost {
                        row_tile: rt,
                        col_tile: ct,
                        dp_ops: dp,
                        passes: dp * passes,
                        fill_cycles: fill,
                        stream_cycles: rg as u64 * passes,
                        drain_cycles: drain,
                    });
                    sram_bits += stream_bits_per_tile;
                }
            }
        }
    }

    // Accumulator outputs leave through the BFP converter at the stored
    // width of 4; downstream consumers may discard the low chunk plane.
    let out_groups = ((p * q) as u64).div_ceil(g);
    sram_bits += out_groups * crate::storage::storage_bits(job.left.exponent_bits(), g as usize, 4);
    let cycles = tiles.iter().map(TileCost::cycles).sum();
    Ok(TileSchedule {
        mode: job.mode,
        tiles,
        cycles,
        sram_bits,
        converter_groups: out_groups,
    })
}

fn tile_span(total: usize, index: usize, size: usize) -> usize {
    (total - index * size).min(size)
}

/// Price a schedule with the calibrated constants.
pub fn estimate_cost(schedule: &TileSchedule, params: &CostModelParams) -> CostReport {
    let dp_ops = schedule.tiles.iter().map(|t| t.dp_ops).sum();
    let passes: u64 = schedule.tiles.iter().map(|t| t.passes).sum();
    let energy_j = passes as f64 * params.fmac_pass_energy_j
        + schedule.converter_groups as f64 * params.converter_group_energy_j
        + schedule.sram_bits as f64 * params.sram_bit_energy_j;
    CostReport {
        dp_ops,
        passes,
        cycles: schedule.cycles,
        converter_groups: schedule.converter_groups,
        sram_bits: schedule.sram_bits,
        energy_j,
        tiles: schedule.tiles.clone(),
    }
}

/// The simulator: an array configuration plus cost constants.
#[derive(Debug, Clone, Default)]
pub struct Simulator {
    pub cfg: ArrayConfig,
    pub params: CostModelParams,
}

impl Simulator {
    pub fn new(cfg: ArrayConfig, params: CostModelParams) -> Self {
        Simulator { cfg, params }
    }

    /// Execute a job tile by tile. The functional result is the bfp_dot
    /// fold in ascending reduction-group order per output element,
    /// regardless of tiling.
    pub fn run(&self, job: &SystolicJob) -> Result<(Tensor, CostReport)> {
        let [p, q] = job.output_shape();
        let rg = job.reduction_groups();
        let mut accs = vec![FpAccumulator::new(); p * q];

        match job.mode {
            DataflowMode::Forward | DataflowMode::GradA => {
                let row_tiles = rg.div_ceil(self.cfg.rows).max(1);
                let col_tiles = q.div_ceil(self.cfg.cols).max(1);
                for ct in 0..col_tiles {
                    let q_lo = ct * self.cfg.cols;
                    let q_hi = (q_lo + self.cfg.cols).min(q);
                    for rt in 0..row_tiles {
                        let rg_lo = rt * self.cfg.rows;
                        let rg_hi = (rg_lo + self.cfg.rows).min(rg);
                        for pi in 0..p {
                            for qi in q_lo..q_hi {
                                let acc = &mut accs[pi * q + qi];
                                for k in rg_lo..rg_hi {
                                    let d = bfp_dot(job.left.group(pi, k), job.right.group(qi, k))?;
                                    acc.accumulate(d);
                                }
                            }
                        }
                    }
                }
            }
            DataflowMode::GradW => {
                let row_tiles = p.div_ceil(self.cfg.rows).max(1);
                let col_tiles = q.div_ceil(self.cfg.cols).max(1);
                for rt in 0..row_tiles {
                    let p_lo = rt * self.cfg.rows;
                    let p_hi = (p_lo + self.cfg.rows).min(p);
                    for ct in 0..col_tiles {
                        let q_lo = ct * self.cfg.cols;
                        let q_hi = (q_lo + self.cfg.cols).min(q);
                        for pi in p_lo..p_hi {
                            for qi in q_lo..q_hi {
                                let acc = &mut accs[pi * q + qi];
                                for k in 0..rg {
                                    let d = bfp_dot(job.left.group(pi, k), job.right.group(qi, k))?;
                                    acc.accumulate(d);
                                }
                            }
                        }
                    }
                }
            }
        }

        let out = Tensor::from_vec(&[p, q], accs.iter().map(|a| a.value()).collect())?;
        let schedule = tile_schedule(job, &self.cfg, &self.params)?;
        Ok((out, estimate_cost(&schedule, &self.params)))
    }

    /// Forward pass `O = A x W`.
    pub fn run_forward(&self, activations: &BfpTensor, weights: &BfpTensor) -> Result<(Tensor, CostReport)> {
        self.run(&SystolicJob::forward(activations, weights)?)
    }

    /// Backward pass for activations, `grad_A = grad_O x W^T`, without
    /// materializing a transposed weight copy.
    pub fn run_grad_a(&self, output_grads: &BfpTensor, weights: &BfpTensor) -> Result<(Tensor, CostReport)> {
        self.run(&SystolicJob::grad_activations(output_grads, weights)?)
    }

    /// Backward pass for weights, `grad_W = A^T x grad_O`, accumulation
    /// stationary.
    pub fn run_grad_w(&self, activations: &BfpTensor, output_grads: &BfpTensor) -> Result<(Tensor, CostReport)> {
        self.run(&SystolicJob::grad_weights(activations, output_grads)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfp::{quantize_tensor, NoiseSource, RoundingMode};
    use crate::tensor::transpose_ops_invoked;

    fn quant(t: &Tensor, axis: usize, g: usize, m: u32) -> BfpTensor {
        quantize_tensor(t, axis, g, m, RoundingMode::Truncate, &NoiseSource::new(0)).unwrap()
    }

    fn seeded_matrix(rows: usize, cols: usize, seed: u64, scale: f32) -> Tensor {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let data = (0..rows * cols)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state >> 40) as f32 / (1u64 << 23) as f32 - 0.5) * 2.0 * scale
            })
            .collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    /// Reference: plain fold of bfp_dot in ascending group order.
    fn reference(left: &BfpTensor, right: &BfpTensor) -> Tensor {
        let p = left.outer_count();
        let q = right.outer_count();
        let rg = left.groups_per_axis();
        let mut out = Tensor::zeros(&[p, q]);
        for pi in 0..p {
            for qi in 0..q {
                let mut acc = FpAccumulator::new();
                for k in 0..rg {
                    acc.accumulate(bfp_dot(left.group(pi, k), right.group(qi, k)).unwrap());
                }
                out.set(pi, qi, acc.value());
            }
        }
        out
    }

    fn small_sim() -> Simulator {
        Simulator::new(
            ArrayConfig {
                rows: 2,
                cols: 2,
                group_size: 4,
                clock_hz: 500e6,
            },
            CostModelParams::default(),
        )
    }

    #[test]
    fn forward_matches_reference_with_tiling() {
        let a = quant(&seeded_matrix(5, 12, 1, 2.0), 1, 4, 4);
        let w = quant(&seeded_matrix(12, 7, 2, 1.0), 0, 4, 4);
        let sim = small_sim();
        let (out, report) = sim.run_forward(&a, &w).unwrap();
        let want = reference(&a, &w);
        assert_eq!(out.data(), want.data());
        // 3 reduction groups over 2 rows -> 2 row tiles; 7 cols over 2 -> 4
        assert_eq!(report.tiles.len(), 8);
        assert_eq!(report.dp_ops, (5 * 7 * 3) as u64);
        assert_eq!(report.passes, report.dp_ops * 4);
    }

    #[test]
    fn forward_identity_weights_reproduce_activations() {
        // power-of-two diagonal is exactly representable at m=2
        let mut w = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            w.set(i, i, 1.0);
        }
        let a = quant(&seeded_matrix(3, 4, 9, 1.0), 1, 4, 2);
        let wq = quant(&w, 0, 4, 2);
        let sim = small_sim();
        let (out, _) = sim.run_forward(&a, &wq).unwrap();
        assert_eq!(out.data(), a.dequantize().data());
    }

    #[test]
    fn grad_a_matches_transposed_oracle_without_transposing() {
        let d_o = quant(&seeded_matrix(6, 10, 3, 1.0), 1, 4, 4);
        let w_rowgrouped = quant(&seeded_matrix(5, 10, 4, 1.0), 1, 4, 2);
        let before = transpose_ops_invoked();
        let w_bytes: Vec<u8> = w_rowgrouped
            .groups()
            .iter()
            .flat_map(|g| crate::storage::pack_group(g, 4).unwrap().bytes().to_vec())
            .collect();
        let sim = small_sim();
        let (out, _) = sim.run_grad_a(&d_o, &w_rowgrouped).unwrap();
        assert_eq!(out.shape(), &[6, 5]);
        assert_eq!(out.data(), reference(&d_o, &w_rowgrouped).data());
        // f64 oracle: grad_A = dO x W^T on dequantized operands
        let od = d_o.dequantize();
        let wd = w_rowgrouped.dequantize();
        for i in 0..6 {
            for k in 0..5 {
                let mut want = 0f64;
                for n in 0..10 {
                    want += od.get(i, n) as f64 * wd.get(k, n) as f64;
                }
                assert!((out.get(i, k) as f64 - want).abs() < 1e-4);
            }
        }
        // structural: no transpose materialized, weight buffer untouched
        assert_eq!(transpose_ops_invoked(), before);
        let w_bytes_after: Vec<u8> = w_rowgrouped
            .groups()
            .iter()
            .flat_map(|g| crate::storage::pack_group(g, 4).unwrap().bytes().to_vec())
            .collect();
        assert_eq!(w_bytes, w_bytes_after);
    }

    #[test]
    fn grad_a_diagonal_weights_scale_gradients() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.set(i, i, 2f32.powi(i as i32));
        }
        let wq = quant(&w, 1, 4, 2);
        let d_o = quant(&seeded_matrix(2, 3, 5, 1.0), 1, 4, 2);
        let (out, _) = small_sim().run_grad_a(&d_o, &wq).unwrap();
        let od = d_o.dequantize();
        for i in 0..2 {
            for k in 0..3 {
                assert_eq!(out.get(i, k), od.get(i, k) * 2f32.powi(k as i32));
            }
        }
    }

    #[test]
    fn grad_w_matches_oracle_and_zero_grads_give_zero() {
        let a = quant(&seeded_matrix(8, 5, 6, 1.0), 0, 4, 2);
        let d_o = quant(&seeded_matrix(8, 3, 7, 1.0), 0, 4, 4);
        let sim = small_sim();
        let (out, _) = sim.run_grad_w(&a, &d_o).unwrap();
        assert_eq!(out.shape(), &[5, 3]);
        assert_eq!(out.data(), reference(&a, &d_o).data());

        let zeros = quant(&Tensor::zeros(&[8, 3]), 0, 4, 4);
        let (out, _) = sim.run_grad_w(&a, &zeros).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_w_batch_split_equivalence() {
        // integer-valued operands keep every f32 accumulation exact, so
        // summing two half-batch jobs must match the single job bit for bit
        let ints = |rows: usize, cols: usize, seed: u64| {
            let mut state = seed;
            let data = (0..rows * cols)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(7);
                    ((state >> 48) % 15) as f32 - 7.0
                })
                .collect();
            Tensor::matrix(rows, cols, data).unwrap()
        };
        let a = ints(16, 6, 1);
        let d_o = ints(16, 4, 2);
        let sim = small_sim();

        let full = sim
            .run_grad_w(&quant(&a, 0, 4, 4), &quant(&d_o, 0, 4, 4))
            .unwrap()
            .0;

        let split = |t: &Tensor, lo: usize, hi: usize| {
            let cols = t.cols();
            let data = t.data()[lo * cols..hi * cols].to_vec();
            Tensor::matrix(hi - lo, cols, data).unwrap()
        };
        let first = sim
            .run_grad_w(
                &quant(&split(&a, 0, 8), 0, 4, 4),
                &quant(&split(&d_o, 0, 8), 0, 4, 4),
            )
            .unwrap()
            .0;
        let second = sim
            .run_grad_w(
                &quant(&split(&a, 8, 16), 0, 4, 4),
                &quant(&split(&d_o, 8, 16), 0, 4, 4),
            )
            .unwrap()
            .0;
        for i in 0..full.len() {
            let summed = first.data()[i] + second.data()[i];
            assert_eq!(summed.to_bits(), full.data()[i].to_bits());
        }
    }

    #[test]
    fn tiling_matches_untiled_bit_for_bit() {
        let a = quant(&seeded_matrix(9, 40, 11, 1.5), 1, 8, 4);
        let w = quant(&seeded_matrix(40, 9, 12, 1.5), 0, 8, 4);
        let tiled = Simulator::new(
            ArrayConfig {
                rows: 2,
                cols: 3,
                group_size: 8,
                clock_hz: 1.0,
            },
            CostModelParams::default(),
        );
        let untiled = Simulator::new(
            ArrayConfig {
                rows: 512,
                cols: 512,
                group_size: 8,
                clock_hz: 1.0,
            },
            CostModelParams::default(),
        );
        let (o1, r1) = tiled.run_forward(&a, &w).unwrap();
        let (o2, r2) = untiled.run_forward(&a, &w).unwrap();
        assert_eq!(o1.data(), o2.data());
        assert!(r1.tiles.len() > 1);
        assert_eq!(r2.tiles.len(), 1);
        assert_eq!(r1.passes, r2.passes);
    }

    #[test]
    fn schedule_tile_counts() {
        // stationary operand with 512 reduction groups on a 256-row array
        let a = quant(&seeded_matrix(1, 512 * 2, 13, 1.0), 1, 2, 2);
        let w = quant(&seeded_matrix(512 * 2, 1, 14, 1.0), 0, 2, 2);
        let job = SystolicJob::forward(&a, &w).unwrap();
        let cfg = ArrayConfig {
            rows: 256,
            cols: 64,
            group_size: 2,
            clock_hz: 1.0,
        };
        let sched = tile_schedule(&job, &cfg, &CostModelParams::default()).unwrap();
        assert_eq!(sched.tiles.len(), 2);

        // matrix smaller than the array -> single tile
        let a = quant(&seeded_matrix(3, 8, 15, 1.0), 1, 2, 2);
        let w = quant(&seeded_matrix(8, 3, 16, 1.0), 0, 2, 2);
        let job = SystolicJob::forward(&a, &w).unwrap();
        let sched = tile_schedule(&job, &cfg, &CostModelParams::default()).unwrap();
        assert_eq!(sched.tiles.len(), 1);
    }

    #[test]
    fn stream_cycles_halve_with_half_the_activation_width() {
        let a_t = seeded_matrix(10, 32, 17, 1.0);
        let w_t = seeded_matrix(32, 4, 18, 1.0);
        let w = quant(&w_t, 0, 16, 4);
        let cfg = ArrayConfig {
            rows: 8,
            cols: 8,
            group_size: 16,
            clock_hz: 1.0,
        };
        let params = CostModelParams::default();
        let a4 = quant(&a_t, 1, 16, 4);
        let a2 = quant(&a_t, 1, 16, 2);
        let s4 = tile_schedule(&SystolicJob::forward(&a4, &w).unwrap(), &cfg, &params).unwrap();
        let s2 = tile_schedule(&SystolicJob::forward(&a2, &w).unwrap(), &cfg, &params).unwrap();
        let stream = |s: &TileSchedule| s.tiles.iter().map(|t| t.stream_cycles).sum::<u64>();
        assert_eq!(stream(&s4), 2 * stream(&s2));
    }

    #[test]
    fn zero_size_job_costs_nothing() {
        let a = quant(&Tensor::zeros(&[0, 4]), 1, 4, 2);
        let w = quant(&seeded_matrix(4, 4, 19, 1.0), 0, 4, 2);
        let job = SystolicJob::forward(&a, &w).unwrap();
        let sched = tile_schedule(&job, &ArrayConfig::default(), &CostModelParams::default()).unwrap();
        let report = estimate_cost(&sched, &CostModelParams::default());
        assert_eq!(report.cycles, 0);
        assert_eq!(report.passes, 0);
        assert_eq!(report.energy_j, 0.0);
    }

    #[test]
    fn doubling_batch_doubles_dp_ops() {
        let w = quant(&seeded_matrix(16, 4, 20, 1.0), 0, 16, 2);
        let cfg = ArrayConfig::default();
        let params = CostModelParams::default();
        let a1 = quant(&seeded_matrix(8, 16, 21, 1.0), 1, 16, 2);
        let a2 = quant(&seeded_matrix(16, 16, 22, 1.0), 1, 16, 2);
        let r1 = estimate_cost(
            &tile_schedule(&SystolicJob::forward(&a1, &w).unwrap(), &cfg, &params).unwrap(),
            &params,
        );
        let r2 = estimate_cost(
            &tile_schedule(&SystolicJob::forward(&a2, &w).unwrap(), &cfg, &params).unwrap(),
            &params,
        );
        assert_eq!(r2.dp_ops, 2 * r1.dp_ops);
        assert_eq!(r2.passes, 2 * r1.passes);
    }

    #[test]
    fn shape_mismatches_rejected() {
        let a = quant(&seeded_matrix(2, 8, 23, 1.0), 1, 4, 2);
        let w_bad = quant(&seeded_matrix(12, 3, 24, 1.0), 0, 4, 2);
        assert!(SystolicJob::forward(&a, &w_bad).is_err());
        let w_wrong_axis = quant(&seeded_matrix(8, 3, 25, 1.0), 1, 4, 2);
        assert!(SystolicJob::forward(&a, &w_wrong_axis).is_err());
    }
}
