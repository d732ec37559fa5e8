//! Desk-scale DNN training harness with BFP-quantized matrix products,
//! stochastically rounded gradients, and schedulable precision.

pub mod data;
mod harness;
mod model;
mod schedule;

pub use data::{digits, two_moons, two_moons_lifted, BatchPlan, Dataset, MOON_FEATURES};
pub use harness::{
    run_experiment, time_to_accuracy, tta_csv, RunRecord, Task, TrainConfig, TtaRow, ValPoint,
};
pub use model::{
    accuracy, matmul_f32, matmul_f32_at, matmul_f32_bt, softmax_cross_entropy, CostTotals, Engine,
    Layer, LayerPrecision, Model, ModelKind, WeightStorage,
};
pub use schedule::Schedule;
