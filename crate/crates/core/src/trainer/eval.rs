use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::ChannelSpec;
use crate::datapipe::DomainDataset;
use crate::error::{Error, Result};
use crate::evalkit::accuracy;
use crate::model::{forward_sample, Link, ModelParams, PredictionDist};
use crate::rng::{mix, substream, Stream};

/// Channel phase id of evaluation noise streams.
pub const EVAL_PHASE: u32 = 10;

/// Accuracy over several independent channel-noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean: f64,
    /// Sample standard deviation over draws (0 for a single draw).
    pub std: f64,
    pub per_draw: Vec<f64>,
    /// Hard decisions of the first draw.
    pub predictions: Vec<usize>,
}

fn eval_rngs(seed: u64, draw: usize, k: usize) -> Vec<ChaCha8Rng> {
    let s = mix(seed, draw as u64);
    (0..k)
        .map(|d| {
            substream(
                s,
                Stream::Channel {
                    phase: EVAL_PHASE,
                    device: d as u32,
                },
            )
        })
        .collect()
}

/// Predictions for every sample under one noise draw; the full digital
/// transceiver runs in digital mode.
pub fn predict_dataset(
    params: &ModelParams,
    dataset: &DomainDataset,
    channel: &ChannelSpec,
    seed: u64,
    draw: usize,
) -> Result<Vec<PredictionDist>> {
    let mut rngs = eval_rngs(seed, draw, channel.k_devices());
    dataset
        .samples()
        .iter()
        .map(|s| Ok(forward_sample(params, s.views(), channel, Link::Infer(&mut rngs))?.prediction))
        .collect()
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Accuracy on a dataset with known labels, averaged over `draws` noise
/// realisations. Draws run in parallel; each owns its generators, so the
/// result does not depend on scheduling.
pub fn evaluate(
    params: &ModelParams,
    dataset: &DomainDataset,
    channel: &ChannelSpec,
    draws: usize,
    seed: u64,
) -> Result<EvalReport> {
    if draws == 0 {
        return Err(Error::Config("evaluation needs at least one noise draw".into()));
    }
    let truth = dataset
        .truths()
        .ok_or_else(|| Error::Data("evaluation dataset has no labels".into()))?;
    let runs: Vec<Vec<usize>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            predict_dataset(params, dataset, channel, seed, d).map(|p| p.iter().map(|x| x.label()).collect())
        })
        .collect::<Result<_>>()?;
    let per_draw = runs
        .iter()
        .map(|preds| accuracy(preds, &truth))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&per_draw);
    Ok(EvalReport {
        mean,
        std,
        per_draw,
        predictions: runs.into_iter().next().unwrap_or_default(),
    })
}

/// Direct deployment of the source model on the target domain, with no
/// parameter updates.
pub fn test_direct(
    source_params: &ModelParams,
    target: &DomainDataset,
    channel: &ChannelSpec,
    draws: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate(source_params, target, channel, draws, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.290_994_448_735_805_6).abs() < 1e-12);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }
}
