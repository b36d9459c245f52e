use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossOptions, LossWeights};
use crate::model::GroupRates;

/// Hyperparameters of both training steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainPlan {
    /// Step-1 epochs `E`.
    pub epochs: usize,
    /// Step-2 epochs `E_f`.
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Initial learning rate per parameter group.
    pub lr0: GroupRates,
    pub weights: LossWeights,
    pub losses: LossOptions,
    pub seed: u64,
    /// Channel-noise draws averaged by final evaluations.
    pub eval_draws: usize,
    /// Draws used for the per-epoch accuracy curves; 0 disables them.
    pub curve_draws: usize,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            epochs: 100,
            finetune_epochs: 20,
            batch_size: 16,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr0: GroupRates::default(),
            weights: LossWeights::default(),
            losses: LossOptions::default(),
            seed: 0,
            eval_draws: 5,
            curve_draws: 1,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("momentum must be in [0, 1) and weight decay >= 0".into()));
        }
        let r = self.lr0;
        if [r.sre, r.cce, r.decoder].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("learning rates must be finite and >= 0".into()));
        }
        if self.eval_draws == 0 {
            return Err(Error::Config("eval_draws must be at least 1".into()));
        }
        self.weights.validate()
    }
}
