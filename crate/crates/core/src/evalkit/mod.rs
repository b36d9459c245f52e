//! Accuracy, confusion matrices, SNR and CR sweeps, and their persisted
//! tables and charts.

mod metrics;
mod plot;
mod sweep;

pub use metrics::{accuracy, confusion_matrix, ConfusionMatrix};
pub use plot::{plot_confusion, plot_sweep};
pub use sweep::{axis_range, cr_sweep, run_sweep, snr_sweep, Axis, Method, SweepPoint, SweepRecord, SweepResult};
