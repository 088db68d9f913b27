//! Sample plans, the GCN model, and the simulated distributed training loop.

mod model;
mod plan;
mod train;

pub use model::{forward, loss_and_backward, GcnModel};
pub use plan::{ladies_plan, saint_plan, PlanLayer, SamplePlan, SparseBlock};
pub use train::{
    evaluate, predict, train_distributed, CommLedger, EpochRecord, EpochSummary, EvalScore,
    Metrics, Optimizer, PlanKind, TrainConfig, TrainOutcome,
};
