//! Analytic cost model for systolic jobs: pass counts are exact work
//! accounting, cycles follow a declared fill/stream/drain formula, and
//! energy applies calibrated per-event constants.

use serde::{Deserialize, Serialize};

/// Array geometry and clock (clock is reporting-only).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub group_size: usize,
    pub clock_hz: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            rows: 256,
            cols: 64,
            group_size: 16,
            clock_hz: 500e6,
        }
    }
}

/// Calibrated energy and overhead constants.
///
/// Defaults derive from the reference design's published numbers: a single
/// MAC cell at 0.885 mW and 500 MHz spends 1.77 pJ per pass; the converter
/// and memory subsystem budgets are spread over one group conversion and
/// one streamed bit per cycle respectively. Absolute joules are calibrated
/// estimates — relative comparisons between precision settings are the
/// meaningful output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostModelParams {
    /// Energy of one fMAC pass over one group pair.
    pub fmac_pass_energy_j: f64,
    /// Energy to convert one group of accumulator outputs to BFP.
    pub converter_group_energy_j: f64,
    /// Energy to move one packed bit through SRAM.
    pub sram_bit_energy_j: f64,
    /// Fill skew: cycles per array row per tile.
    pub fill_cycles_per_row: f64,
    /// Fill skew: cycles per array column per tile.
    pub fill_cycles_per_col: f64,
    /// Drain: cycles per array column per tile.
    pub drain_cycles_per_col: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams {
            fmac_pass_energy_j: 1.77e-12,
            converter_group_energy_j: 3.54e-9,
            sram_bit_energy_j: 4.0e-13,
            fill_cycles_per_row: 1.0,
            fill_cycles_per_col: 1.0,
            drain_cycles_per_col: 1.0,
        }
    }
}

impl CostModelParams {
    pub fn fill_cycles(&self, cfg: &ArrayConfig) -> u64 {
        (cfg.rows as f64 * self.fill_cycles_per_row + cfg.cols as f64 * self.fill_cycles_per_col)
            .ceil() as u64
    }

    pub fn drain_cycles(&self, cfg: &ArrayConfig) -> u64 {
        (cfg.cols as f64 * self.drain_cycles_per_col).ceil() as u64
    }
}

/// One tile of a schedule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TileCost {
    pub row_tile: usize,
    pub col_tile: usize,
    /// Group-pair dot products executed in this tile.
    pub dp_ops: u64,
    /// fMAC passes (dp_ops x pass count).
    pub passes: u64,
    pub fill_cycles: u64,
    pub stream_cycles: u64,
    pub drain_cycles: u64,
}

impl TileCost {
    pub fn cycles(&self) -> u64 {
        self.fill_cycles + self.stream_cycles + self.drain_cycles
    }
}

/// Aggregate cost of one job (or a whole run, when summed).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CostReport {
    pub dp_ops: u64,
    pub passes: u64,
    pub cycles: u64,
    /// Groups converted back to BFP at the accumulator output.
    pub converter_groups: u64,
    /// Packed operand bits read plus output bits written.
    pub sram_bits: u64,
    pub energy_j: f64,
    pub tiles: Vec<TileCost>,
}

impl CostReport {
    pub fn merge(&mut self, other: &CostReport) {
        self.dp_ops += other.dp_ops;
        self.passes += other.passes;
        self.cycles += other.cycles;
        self.converter_groups += other.converter_groups;
        self.sram_bits += other.sram_bits;
        self.energy_j += other.energy_j;
        self.tiles.extend(other.tiles.iter().copied());
    }

    /// Seconds at the configured clock.
    pub fn seconds(&self, cfg: &ArrayConfig) -> f64 {
        self.cycles as f64 / cfg.clock_hz
    }
}
