use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A predicted class distribution with its hard decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDist {
    probs: Vec<f64>,
    label: usize,
}

impl PredictionDist {
    /// Validates that `probs` is a probability simplex (tolerance 1e-6).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("empty probability vector".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::OutOfRange("probabilities must be finite and >= 0".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::OutOfRange(format!("probabilities sum to {sum}")));
        }
        let label = argmax(&probs);
        Ok(PredictionDist { probs, label })
    }

    /// Numerically stable softmax of `logits`.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.into_iter().map(|e| e / total).collect();
        let label = argmax(&probs);
        PredictionDist { probs, label }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Probability of the predicted label.
    pub fn confidence(&self) -> f64 {
        self.probs[self.label]
    }

    pub fn one_hot(&self) -> Vec<f64> {
        one_hot(self.label, self.probs.len())
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    v
}

/// Hard decision and its one-hot encoding.
pub fn predict_label(p: &PredictionDist) -> (usize, Vec<f64>) {
    (p.label(), p.one_hot())
}

/// Back-propagates `d loss / d probs` through the softmax:
/// `d/d logit_j = p_j (g_j - sum_k p_k g_k)`.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(d_probs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(d_probs)
        .map(|(p, g)| p * (g - inner))
        .collect()
}
