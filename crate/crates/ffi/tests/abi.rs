use std::ffi::{CStr, CString};
use std::ptr;

use semedge::channel::{ChannelSpec, QuantizerSpec, TransmissionMode};
use semedge::datapipe::Image;
use semedge::model::{forward_sample, save_checkpoint, GroupRates, Link, ModelConfig, ModelParams};
use semedge::rng::{substream, Stream};
use semedge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; semedge_last_error_length() + 1];
    assert_eq!(unsafe { semedge_last_error_message(buf.as_mut_ptr(), buf.len()) }, SemedgeStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn write_model(dir: &std::path::Path, config: &ModelConfig) -> (CString, ModelParams) {
    let params = ModelParams::init(config, GroupRates::default(), 11).unwrap();
    let path = dir.join("m.ckpt");
    save_checkpoint(&path, &params, 11).unwrap();
    (CString::new(path.to_str().unwrap()).unwrap(), params)
}

fn load(path: &CString) -> *mut SemedgeModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { semedge_model_load(path.as_ptr(), &mut m) }, SemedgeStatus::Ok);
    assert!(!m.is_null());
    m
}

fn sample_views(config: &ModelConfig) -> Vec<f64> {
    (0..config.k_devices * config.view_len()).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect()
}

#[test]
fn noiseless_prediction_matches_core() {
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig::default();
    let (path, params) = write_model(dir.path(), &config);
    let model = load(&path);

    let mut info = SemedgeModelInfo::default();
    assert_eq!(unsafe { semedge_model_info(model, &mut info) }, SemedgeStatus::Ok);
    assert_eq!(info.k_devices, config.k_devices);
    assert_eq!(info.classes, config.classes);
    assert_eq!(info.a_out, config.a_out());
    assert_eq!((info.view_channels, info.view_height, info.view_width), config.view_shape);
    assert_eq!(info.seed, 11);
    assert_eq!(info.digital, 0);

    let views = sample_views(&config);
    let channel = SemedgeChannel { snr_db: 10.0, q_b: 2, r: 3, noiseless: 1 };
    let mut probs = vec![0.0; info.classes];
    let mut label = usize::MAX;
    let st = unsafe {
        semedge_model_predict(model, views.as_ptr(), views.len(), &channel, 5, probs.as_mut_ptr(), probs.len(), &mut label)
    };
    assert_eq!(st, SemedgeStatus::Ok, "{}", last_error());

    let (c, h, w) = config.view_shape;
    let images: Vec<Image> = views.chunks(config.view_len()).map(|v| Image::new(c, h, w, v.to_vec()).unwrap()).collect();
    let spec = ChannelSpec::uniform(10.0, config.k_devices, TransmissionMode::Analog, None).unwrap().with_bypass(true);
    let mut rngs: Vec<_> = (0..config.k_devices as u32)
        .map(|d| substream(0, Stream::Channel { phase: 0, device: d }))
        .collect();
    let expected = forward_sample(&params, &images, &spec, Link::Infer(&mut rngs)).unwrap().prediction;
    assert_eq!(probs, expected.probs());
    assert_eq!(label, expected.label());
    unsafe { semedge_model_free(model) };
}

#[test]
fn noisy_prediction_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig {
        mode: TransmissionMode::Digital,
        ..ModelConfig::default()
    };
    let (path, _) = write_model(dir.path(), &config);
    let model = load(&path);
    let views = sample_views(&config);
    let channel = SemedgeChannel { snr_db: -5.0, q_b: 2, r: 3, noiseless: 0 };
    let run = |seed: u64| {
        let mut probs = vec![0.0; config.classes];
        let st = unsafe {
            semedge_model_predict(model, views.as_ptr(), views.len(), &channel, seed, probs.as_mut_ptr(), probs.len(), ptr::null_mut())
        };
        assert_eq!(st, SemedgeStatus::Ok, "{}", last_error());
        probs
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((2..20).any(|s| run(s) != a), "noise seed has no effect");
    unsafe { semedge_model_free(model) };
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { semedge_model_load(ptr::null(), &mut m) }, SemedgeStatus::NullPointer);
    let missing = CString::new(dir.path().join("none.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { semedge_model_load(missing.as_ptr(), &mut m) }, SemedgeStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("none.ckpt"));

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint at all").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { semedge_model_load(junk.as_ptr(), &mut m) }, SemedgeStatus::Format);

    let config = ModelConfig::default();
    let (path, _) = write_model(dir.path(), &config);
    let model = load(&path);
    let views = sample_views(&config);
    let channel = SemedgeChannel { snr_db: 0.0, q_b: 2, r: 3, noiseless: 0 };
    let mut probs = vec![0.0; config.classes];
    let short = unsafe {
        semedge_model_predict(model, views.as_ptr(), views.len() - 1, &channel, 0, probs.as_mut_ptr(), probs.len(), ptr::null_mut())
    };
    assert_eq!(short, SemedgeStatus::Dimension);
    let small = unsafe {
        semedge_model_predict(model, views.as_ptr(), views.len(), &channel, 0, probs.as_mut_ptr(), 1, ptr::null_mut())
    };
    assert_eq!(small, SemedgeStatus::BufferTooSmall);
    let bad_snr = SemedgeChannel { snr_db: f64::NAN, ..channel };
    let st = unsafe {
        semedge_model_predict(model, views.as_ptr(), views.len(), &bad_snr, 0, probs.as_mut_ptr(), probs.len(), ptr::null_mut())
    };
    assert_eq!(st, SemedgeStatus::Config);
    unsafe { semedge_model_free(model) };
    unsafe { semedge_model_free(ptr::null_mut()) };

    let mut tiny = [0 as std::ffi::c_char; 2];
    assert_eq!(unsafe { semedge_last_error_message(tiny.as_mut_ptr(), tiny.len()) }, SemedgeStatus::BufferTooSmall);
}

#[test]
fn digital_helpers_round_trip() {
    let spec = QuantizerSpec::default();
    let z = [-1.0, -0.4, 0.2, 0.9, 1.0];
    let mut idx = [0u32; 5];
    assert_eq!(unsafe { semedge_quantize(z.as_ptr(), z.len(), 2, -1.0, 1.0, idx.as_mut_ptr()) }, SemedgeStatus::Ok);
    assert_eq!(idx, [0, 1, 2, 3, 3]);
    let mut rec = [0.0; 5];
    assert_eq!(unsafe { semedge_dac(idx.as_ptr(), idx.len(), 2, -1.0, 1.0, rec.as_mut_ptr()) }, SemedgeStatus::Ok);
    for (r, v) in rec.iter().zip(z) {
        assert!((r - v).abs() <= spec.step() / 2.0 + 1e-12);
    }
    let out = [1.5];
    assert_eq!(unsafe { semedge_quantize(out.as_ptr(), 1, 2, -1.0, 1.0, idx.as_mut_ptr()) }, SemedgeStatus::OutOfRange);
    assert_eq!(unsafe { semedge_quantize(z.as_ptr(), 1, 0, -1.0, 1.0, idx.as_mut_ptr()) }, SemedgeStatus::Config);
    let big = [4u32];
    assert_eq!(unsafe { semedge_dac(big.as_ptr(), 1, 2, -1.0, 1.0, rec.as_mut_ptr()) }, SemedgeStatus::OutOfRange);
    assert_eq!(semedge_soft_round(2.0, 3), 2.0);
}

#[test]
fn scalar_helpers() {
    let x = [0.0, 1.0];
    let y = [1.0, 1.0];
    let mut k = 0.0;
    assert_eq!(unsafe { semedge_gaussian_kernel(x.as_ptr(), y.as_ptr(), 2, 1.0, &mut k) }, SemedgeStatus::Ok);
    assert!((k - (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(unsafe { semedge_gaussian_kernel(x.as_ptr(), y.as_ptr(), 2, 0.0, &mut k) }, SemedgeStatus::OutOfRange);
    assert_eq!(semedge_warmup_delta(0, 100), 0.0);
    assert!((semedge_lr_anneal(1.0, 100, 100) - 11f64.powf(-0.75)).abs() < 1e-15);
    let v = unsafe { CStr::from_ptr(semedge_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
