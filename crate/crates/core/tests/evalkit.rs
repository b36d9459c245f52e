//! Sweeps and confusion matrices over a real (untrained) pipeline.

use semedge::channel::{ChannelSpec, TransmissionMode};
use semedge::datapipe::{synth_shift_dataset, SynthSpec};
use semedge::evalkit::{accuracy, confusion_matrix, snr_sweep, Method};
use semedge::model::{GroupRates, ModelConfig, ModelParams};
use semedge::trainer::evaluate;

fn setup() -> (ModelParams, semedge::datapipe::DomainDataset) {
    let (_, t) = synth_shift_dataset(&SynthSpec::reference(), 10, 5, 4, 2).unwrap();
    let p = ModelParams::init(&ModelConfig::default(), GroupRates::default(), 8).unwrap();
    (p, t)
}

fn channel(snr: f64, bypass: bool) -> ChannelSpec {
    ChannelSpec::uniform(snr, 4, TransmissionMode::Analog, None).unwrap().with_bypass(bypass)
}

#[test]
fn single_point_sweep_equals_plain_evaluation() {
    let (p, t) = setup();
    let cell = |_: Method, snr: f64, seed: u64| Ok(evaluate(&p, &t, &channel(snr, false), 5, seed)?.per_draw);
    let sweep = snr_sweep("one", &[0.0], &[Method::TestD], &[4], 1, cell).unwrap();
    let direct = evaluate(&p, &t, &channel(0.0, false), 5, 4).unwrap();
    let point = sweep.point(Method::TestD, 0.0).unwrap();
    assert_eq!(point.mean, direct.mean);
    assert_eq!(point.std, direct.std);
}

#[test]
fn bypassed_sweep_is_flat_and_deterministic() {
    let (p, t) = setup();
    let cell = |_: Method, snr: f64, seed: u64| Ok(evaluate(&p, &t, &channel(snr, true), 2, seed)?.per_draw);
    let axis = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0];
    let a = snr_sweep("flat", &axis, &[Method::Dasein], &[1, 2], 3, cell).unwrap();
    let b = snr_sweep("flat", &axis, &[Method::Dasein], &[1, 2], 1, cell).unwrap();
    assert_eq!(a, b);
    let means: Vec<f64> = a.points().iter().map(|p| p.mean).collect();
    assert!(means.windows(2).all(|w| w[0] == w[1]));
    assert!(a.is_monotone(Method::Dasein, 0.0));
}

#[test]
fn confusion_of_real_predictions() {
    let (p, t) = setup();
    let report = evaluate(&p, &t, &channel(5.0, false), 1, 0).unwrap();
    let truth = t.truths().unwrap();
    let cm = confusion_matrix(&report.predictions, &truth, 5).unwrap();
    assert_eq!(cm.row_sums(), vec![10; 5]);
    assert_eq!(cm.accuracy(), accuracy(&report.predictions, &truth).unwrap());
    assert_eq!(cm.accuracy(), report.per_draw[0]);
}
