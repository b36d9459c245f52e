//! Training objectives.

mod classification;
mod composite;
mod kernel;
mod mmd;
mod schedule;
mod taylor;

pub use classification::{cross_entropy, cross_entropy_grad, kd_ce_masked, kd_ce_masked_grad, kd_mask, KdOrientation, PROB_FLOOR};
pub use composite::{loss_step1, loss_step2, DomainOutputs, LossBreakdown, LossOptions, LossWeights};
pub use kernel::{gaussian_kernel, median_bandwidth, squared_distance, BandwidthMode, KernelSpec};
pub use mmd::{class_weights, lmmd, lmmd_with_grad, mmd_v, mmd_v_with_grad, Discrepancy, TargetWeighting};
pub use schedule::warmup_delta;
pub use taylor::taylor_features;
