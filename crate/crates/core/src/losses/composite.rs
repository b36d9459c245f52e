//! The two training objectives, returning values and gradients with respect
//! to each sample's probability vector and post-channel feature vector.

use serde::{Deserialize, Serialize};

use super::classification::{cross_entropy, cross_entropy_grad, kd_ce_masked, kd_ce_masked_grad, kd_mask, KdOrientation};
use super::kernel::KernelSpec;
use super::mmd::{lmmd_with_grad, TargetWeighting};
use super::schedule::warmup_delta;
use crate::error::{Error, Result};
use crate::model::{one_hot, PredictionDist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Step-1 UDA weight.
    pub lambda: f64,
    /// Step-2 UDA weight.
    pub lambda1: f64,
    /// Step-2 distillation weight.
    pub lambda2: f64,
    /// Teacher confidence threshold of the distillation mask.
    pub epsilon: f64,
    /// Generic distillation mixing weight on the soft-label term. Step 2
    /// realises it through `lambda2`; the field only records it.
    pub alpha: f64,
    /// Weight of the supervised cross-entropy term in both steps (1 by
    /// default; setting 0 isolates the other terms).
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 0.1,
            lambda1: 0.1,
            lambda2: 0.5,
            epsilon: 0.9,
            alpha: 0.5,
            beta: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.lambda, self.lambda1, self.lambda2, self.alpha, self.beta];
        if ws.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Kernel and weighting choices shared by both objectives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LossOptions {
    pub kernel: KernelSpec,
    pub target_weighting: TargetWeighting,
    pub kd_orientation: KdOrientation,
}

/// Network outputs for one side of a batch.
#[derive(Debug, Clone, Copy)]
pub struct DomainOutputs<'a> {
    /// Post-channel features `z-hat` (concatenated over devices).
    pub features: &'a [Vec<f64>],
    pub preds: &'a [PredictionDist],
}

/// Loss value, its components and the gradients the network needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce: f64,
    pub uda: f64,
    pub kd: f64,
    /// Warm-up factor applied to the UDA term (1 in step 2).
    pub delta: f64,
    pub bandwidth: f64,
    /// Number of target samples kept by the distillation mask.
    pub kd_kept: usize,
    pub d_source_probs: Vec<Vec<f64>>,
    pub d_source_features: Vec<Vec<f64>>,
    pub d_target_probs: Vec<Vec<f64>>,
    pub d_target_features: Vec<Vec<f64>>,
}

fn check_side(side: &DomainOutputs<'_>, what: &str) -> Result<()> {
    if side.features.len() != side.preds.len() {
        return Err(Error::Dimension(format!("{what}: feature and prediction counts differ")));
    }
    if side.preds.is_empty() {
        return Err(Error::Empty(format!("{what} batch is empty")));
    }
    Ok(())
}

fn supervised_and_uda(
    source: &DomainOutputs<'_>,
    labels: &[usize],
    target: &DomainOutputs<'_>,
    ce_weight: f64,
    uda_weight: f64,
    options: &LossOptions,
) -> Result<LossBreakdown> {
    check_side(source, "source")?;
    check_side(target, "target")?;
    if labels.len() != source.preds.len() {
        return Err(Error::Dimension("source labels and predictions differ in count".into()));
    }
    let classes = source.preds[0].classes();
    let n_s = labels.len() as f64;
    let mut ce = 0.0;
    let mut d_source_probs = Vec::with_capacity(labels.len());
    for (p, &y) in source.preds.iter().zip(labels) {
        if y >= classes {
            return Err(Error::Dimension(format!("label {y} >= {classes} classes")));
        }
        let t = one_hot(y, classes);
        ce += cross_entropy(p, &t);
        d_source_probs.push(cross_entropy_grad(p, &t).into_iter().map(|g| ce_weight * g / n_s).collect());
    }
    ce /= n_s;
    let d = lmmd_with_grad(
        source.features,
        labels,
        target.features,
        target.preds,
        classes,
        &options.kernel,
        options.target_weighting,
    )?;
    let scale = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(|g| g * uda_weight).collect())
            .collect()
    };
    Ok(LossBreakdown {
        total: ce_weight * ce + uda_weight * d.value,
        ce,
        uda: d.value,
        kd: 0.0,
        delta: 1.0,
        bandwidth: d.bandwidth,
        kd_kept: 0,
        d_source_probs,
        d_source_features: scale(d.grad_source),
        d_target_probs: vec![vec![0.0; classes]; target.preds.len()],
        d_target_features: scale(d.grad_target),
    })
}

/// `L1 = beta * CE(source) + delta(e, E) * lambda * LMMD(z_s, y_s, z_t, p_t)`.
pub fn loss_step1(
    source: DomainOutputs<'_>,
    labels: &[usize],
    target: DomainOutputs<'_>,
    weights: &LossWeights,
    options: &LossOptions,
    epoch: usize,
    epochs: usize,
) -> Result<LossBreakdown> {
    let delta = warmup_delta(epoch, epochs);
    let mut out = supervised_and_uda(&source, labels, &target, weights.beta, delta * weights.lambda, options)?;
    out.delta = delta;
    Ok(out)
}

/// `L2 = beta * CE(source, student) + lambda1 * LMMD + lambda2 * masked KD`.
///
/// `target` holds the student's outputs; `teacher_target` the teacher's
/// predictions on the same target samples (constants).
pub fn loss_step2(
    source: DomainOutputs<'_>,
    labels: &[usize],
    target: DomainOutputs<'_>,
    teacher_target: &[PredictionDist],
    weights: &LossWeights,
    options: &LossOptions,
) -> Result<LossBreakdown> {
    if teacher_target.len() != target.preds.len() {
        return Err(Error::Dimension("teacher and student target batches differ".into()));
    }
    let mut out = supervised_and_uda(&source, labels, &target, weights.beta, weights.lambda1, options)?;
    let mask = kd_mask(teacher_target, weights.epsilon);
    let kd = kd_ce_masked(target.preds, teacher_target, &mask, options.kd_orientation);
    let kd_grad = kd_ce_masked_grad(target.preds, teacher_target, &mask, options.kd_orientation);
    out.kd = kd;
    out.kd_kept = mask.iter().filter(|&&m| m).count();
    out.total += weights.lambda2 * kd;
    out.d_target_probs = kd_grad
        .into_iter()
        .map(|r| r.into_iter().map(|g| g * weights.lambda2).collect())
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch() -> (Vec<Vec<f64>>, Vec<PredictionDist>, Vec<usize>, Vec<Vec<f64>>, Vec<PredictionDist>) {
        let fs = vec![vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.5, -0.1]];
        let ps = vec![
            PredictionDist::from_logits(&[1.0, 0.0]),
            PredictionDist::from_logits(&[0.0, 2.0]),
            PredictionDist::from_logits(&[0.3, 0.1]),
        ];
        let ft = vec![vec![0.7, 0.1], vec![0.0, -0.5]];
        let pt = vec![PredictionDist::from_logits(&[3.0, 0.0]), PredictionDist::from_logits(&[0.0, 0.5])];
        (fs, ps, vec![0, 1, 0], ft, pt)
    }

    #[test]
    fn defaults() {
        let w = LossWeights::default();
        assert_eq!((w.lambda, w.lambda1, w.lambda2), (0.1, 0.1, 0.5));
        assert!(w.validate().is_ok());
        assert!(LossWeights { epsilon: 1.0, ..w }.validate().is_err());
        assert!(LossWeights { lambda: -0.1, ..w }.validate().is_err());
    }

    #[test]
    fn epoch_zero_is_plain_cross_entropy() {
        let (fs, ps, y, ft, pt) = batch();
        let src = DomainOutputs { features: &fs, preds: &ps };
        let tgt = DomainOutputs { features: &ft, preds: &pt };
        let o = LossOptions::default();
        let l = loss_step1(src, &y, tgt, &LossWeights::default(), &o, 0, 10).unwrap();
        assert_eq!(l.total, l.ce);
        assert!(l.uda > 0.0);
        assert!(l.d_source_features.iter().flatten().all(|&g| g == 0.0));
        let later = loss_step1(src, &y, tgt, &LossWeights::default(), &o, 5, 10).unwrap();
        assert_relative_eq!(later.total, later.ce + 0.1 * warmup_delta(5, 10) * later.uda, epsilon = 1e-15);
    }

    #[test]
    fn step2_reduces_to_fine_tuning() {
        let (fs, ps, y, ft, pt) = batch();
        let src = DomainOutputs { features: &fs, preds: &ps };
        let tgt = DomainOutputs { features: &ft, preds: &pt };
        let w = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            ..LossWeights::default()
        };
        let l = loss_step2(src, &y, tgt, &pt, &w, &LossOptions::default()).unwrap();
        assert_eq!(l.total, l.ce);
        // teacher == student: only the first target sample is confident enough
        assert_eq!(l.kd_kept, 1);
        let p = pt[0].probs();
        assert_relative_eq!(l.kd, -(p[0] * p[0].ln() + p[1] * p[1].ln()), epsilon = 1e-12);
    }
}
