//! Network contracts: normalisation, determinism and checkpoint handling.

use proptest::prelude::*;
use semedge::channel::TransmissionMode;
use semedge::datapipe::Image;
use semedge::losses::cross_entropy_grad;
use semedge::model::{
    cce_forward, load_checkpoint, load_checkpoint_for, save_checkpoint, softmax_backward, sre_forward, FeatureVector,
    GroupRates, ModelConfig, ModelParams, PredictionDist,
};
use semedge::Error;

fn params(mode: TransmissionMode, seed: u64) -> ModelParams {
    let config = ModelConfig { mode, ..ModelConfig::default() };
    ModelParams::init(&config, GroupRates::default(), seed).unwrap()
}

#[test]
fn checkpoints_round_trip_and_reject_damage() {
    let dir = tempfile::tempdir().unwrap();
    let p = params(TransmissionMode::Digital, 3);
    let path = dir.path().join("theta.ckpt");
    save_checkpoint(&path, &p, 77).unwrap();
    let (back, seed) = load_checkpoint(&path).unwrap();
    assert_eq!(seed, 77);
    assert_eq!(back.flatten(), p.flatten());
    assert_eq!(back.config, p.config);

    let analog = ModelConfig::default();
    assert!(matches!(load_checkpoint_for(&path, &analog), Err(Error::Format { .. })));

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    std::fs::write(&path, &bytes[..10]).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn zero_view_gives_finite_features() {
    let p = params(TransmissionMode::Analog, 1);
    let f = sre_forward(&Image::zeros(3, 8, 8), &p).unwrap();
    assert_eq!(f.0.len(), 64);
    assert!(f.0.iter().all(|v| v.is_finite()));
}

#[test]
fn perfect_prediction_has_zero_gradient() {
    let p = PredictionDist::new(vec![1.0, 0.0, 0.0]).unwrap();
    let y = [1.0, 0.0, 0.0];
    let d_logits = softmax_backward(p.probs(), &cross_entropy_grad(&p, &y));
    assert!(d_logits.iter().all(|g| g.abs() < 1e-12), "{d_logits:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn codes_obey_their_mode(seed in 0u64..1000, feats in prop::collection::vec(-5.0f64..5.0, 64)) {
        let f = FeatureVector(feats);
        let analog = cce_forward(&f, &params(TransmissionMode::Analog, seed)).unwrap();
        let power = analog.values.iter().map(|v| v * v).sum::<f64>() / analog.values.len() as f64;
        prop_assert!(analog.power_normalized);
        prop_assert!((power - 1.0).abs() < 1e-6);
        let digital = cce_forward(&f, &params(TransmissionMode::Digital, seed)).unwrap();
        prop_assert!(!digital.power_normalized);
        prop_assert!(digital.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
