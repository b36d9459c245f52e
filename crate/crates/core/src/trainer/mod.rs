//! The two training steps, the optimiser and evaluation.

mod eval;
mod metrics;
mod optim;
mod plan;
mod steps;

pub use eval::{evaluate, mean_std, predict_dataset, test_direct, EvalReport, EVAL_PHASE};
pub use metrics::{EpochMetrics, MetricLog};
pub use optim::{lr_anneal, sgd_step, Momentum};
pub use plan::TrainPlan;
pub use steps::{
    draw_batch_noise, step1_objective, step2_objective, teacher_predictions, train_step1, train_step2, BatchNoise,
    PhaseOutcome, Step2Outcome,
};
