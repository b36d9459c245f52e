//! Kernel discrepancies between source and target feature sets.
//!
//! Both the plain MMD and the class-weighted LMMD are instances of
//! `sum_c |sum_m a_cm phi(x_m)|^2 / C` over the pooled points
//! `x = [source; target]`, with coefficients `a_c = [w_s^c; -w_t^c]`.
//! Writing `A = sum_c a_c a_c^T / C` the value is `sum_mn A_mn K_mn` and
//! the gradient is `dL/dx_m = (2 / sigma_b^2) sum_n A_mn K_mn (x_n - x_m)`.

use serde::{Deserialize, Serialize};

use super::kernel::{squared_distance, KernelSpec};
use crate::error::{Error, Result};
use crate::model::PredictionDist;

/// Value of a weighted discrepancy plus its gradient per pooled point.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub value: f64,
    pub grad_source: Vec<Vec<f64>>,
    pub grad_target: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

/// How target-domain class weights are formed from predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetWeighting {
    /// One-hot of the predicted label.
    #[default]
    Hard,
    /// The predicted probability vector.
    Soft,
}

fn check_sets(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<usize> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Empty("discrepancy needs non-empty source and target sets".into()));
    }
    let dim = source[0].len();
    if source.iter().chain(target).any(|x| x.len() != dim) {
        return Err(Error::Dimension("feature vectors differ in length".into()));
    }
    Ok(dim)
}

fn pooled_discrepancy(
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    coeffs: &[Vec<f64>],
    kernel: &KernelSpec,
    with_grad: bool,
) -> Result<Discrepancy> {
    let dim = check_sets(source, target)?;
    let points: Vec<&[f64]> = source.iter().chain(target).map(|x| x.as_slice()).collect();
    let bandwidth = kernel.resolve(&points)?;
    let n = points.len();
    let classes = coeffs.len() as f64;
    let inv_two_s2 = 1.0 / (2.0 * bandwidth * bandwidth);

    let mut value = 0.0;
    let mut grads = if with_grad { vec![vec![0.0; dim]; n] } else { Vec::new() };
    for m in 0..n {
        for j in 0..n {
            let a: f64 = coeffs.iter().map(|c| c[m] * c[j]).sum::<f64>() / classes;
            if a == 0.0 {
                continue;
            }
            let k = (-squared_distance(points[m], points[j]) * inv_two_s2).exp();
            value += a * k;
            if with_grad && m != j {
                let scale = 2.0 * a * k / (bandwidth * bandwidth);
                for (g, (xn, xm)) in grads[m].iter_mut().zip(points[j].iter().zip(points[m])) {
                    *g += scale * (xn - xm);
                }
            }
        }
    }
    let grad_target = if with_grad { grads.split_off(source.len()) } else { Vec::new() };
    Ok(Discrepancy {
        value,
        grad_source: grads,
        grad_target,
        bandwidth,
    })
}

fn uniform_coeffs(ns: usize, nt: usize) -> Vec<Vec<f64>> {
    let mut c = vec![1.0 / ns as f64; ns];
    c.extend(std::iter::repeat_n(-1.0 / nt as f64, nt));
    vec![c]
}

/// Squared RKHS distance between the empirical mean embeddings, including
/// the `i == j` terms (V-statistic, never negative).
pub fn mmd_v(source: &[Vec<f64>], target: &[Vec<f64>], kernel: &KernelSpec) -> Result<f64> {
    check_sets(source, target)?;
    Ok(pooled_discrepancy(source, target, &uniform_coeffs(source.len(), target.len()), kernel, false)?.value)
}

pub fn mmd_v_with_grad(source: &[Vec<f64>], target: &[Vec<f64>], kernel: &KernelSpec) -> Result<Discrepancy> {
    check_sets(source, target)?;
    pooled_discrepancy(source, target, &uniform_coeffs(source.len(), target.len()), kernel, true)
}

/// `w_i^c = y_ic / sum_j y_jc`; classes with no mass get an all-zero column.
/// Returned as `n × C`.
pub fn class_weights(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let classes = rows.first().map_or(0, |r| r.len());
    let mut totals = vec![0.0; classes];
    for r in rows {
        for (t, v) in totals.iter_mut().zip(r) {
            *t += v;
        }
    }
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&totals)
                .map(|(v, &t)| if t > 0.0 { v / t } else { 0.0 })
                .collect()
        })
        .collect()
}

fn lmmd_coeffs(
    source_labels: &[usize],
    target_preds: &[PredictionDist],
    classes: usize,
    weighting: TargetWeighting,
) -> Result<Vec<Vec<f64>>> {
    if source_labels.iter().any(|&l| l >= classes) {
        return Err(Error::Dimension("source label exceeds class count".into()));
    }
    if target_preds.iter().any(|p| p.classes() != classes) {
        return Err(Error::Dimension("target prediction width differs from class count".into()));
    }
    let src_rows: Vec<Vec<f64>> = source_labels.iter().map(|&l| crate::model::one_hot(l, classes)).collect();
    let tgt_rows: Vec<Vec<f64>> = target_preds
        .iter()
        .map(|p| match weighting {
            TargetWeighting::Hard => p.one_hot(),
            TargetWeighting::Soft => p.probs().to_vec(),
        })
        .collect();
    let ws = class_weights(&src_rows);
    let wt = class_weights(&tgt_rows);
    Ok((0..classes)
        .map(|c| {
            ws.iter()
                .map(|w| w[c])
                .chain(wt.iter().map(|w| -w[c]))
                .collect()
        })
        .collect())
}

/// Class-weighted MMD averaged over the `C` classes. Source weights come
/// from ground-truth labels, target weights from predictions (treated as
/// constants).
pub fn lmmd(
    source: &[Vec<f64>],
    source_labels: &[usize],
    target: &[Vec<f64>],
    target_preds: &[PredictionDist],
    classes: usize,
    kernel: &KernelSpec,
    weighting: TargetWeighting,
) -> Result<f64> {
    Ok(lmmd_with_grad_impl(source, source_labels, target, target_preds, classes, kernel, weighting, false)?.value)
}

pub fn lmmd_with_grad(
    source: &[Vec<f64>],
    source_labels: &[usize],
    target: &[Vec<f64>],
    target_preds: &[PredictionDist],
    classes: usize,
    kernel: &KernelSpec,
    weighting: TargetWeighting,
) -> Result<Discrepancy> {
    lmmd_with_grad_impl(source, source_labels, target, target_preds, classes, kernel, weighting, true)
}

#[allow(clippy::too_many_arguments)]
fn lmmd_with_grad_impl(
    source: &[Vec<f64>],
    source_labels: &[usize],
    target: &[Vec<f64>],
    target_preds: &[PredictionDist],
    classes: usize,
    kernel: &KernelSpec,
    weighting: TargetWeighting,
    with_grad: bool,
) -> Result<Discrepancy> {
    check_sets(source, target)?;
    if source_labels.len() != source.len() || target_preds.len() != target.len() {
        return Err(Error::Dimension("label/prediction count differs from feature count".into()));
    }
    let coeffs = lmmd_coeffs(source_labels, target_preds, classes, weighting)?;
    pooled_discrepancy(source, target, &coeffs, kernel, with_grad)
}
