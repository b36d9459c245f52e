//! Forward and backward passes of the device/channel/server pipeline.
//!
//! Per device: dense extractor stack → ReLU → affine encoder → unit-power
//! normalisation (analog) or tanh bounding (digital) → link. The server
//! concatenates the received vectors and decodes with
//! affine → ReLU → affine → softmax. Extractor and encoder weights are
//! shared by all devices.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{LayerShape, ModelConfig, ModelGrads, ModelParams, ParamGroup};
use super::prediction::PredictionDist;
use crate::channel::digital::{digital_infer_forward, digital_train_forward};
use crate::channel::{awgn, ChannelSpec, TransmissionMode};
use crate::datapipe::Image;
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-12;

/// Extractor output `f^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

/// Encoder output `z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedFeature {
    pub values: Vec<f64>,
    pub power_normalized: bool,
}

impl CodedFeature {
    pub fn average_power(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }
}

/// How the link noise is produced for one forward pass.
pub enum Link<'a> {
    /// Differentiable path. Holds one vector of standard-normal draws per
    /// device (length `a_out`), scaled by each device's sigma.
    Train(&'a [Vec<f64>]),
    /// Evaluation path drawing from per-device generators. Digital mode runs
    /// the full quantize/QPSK chain.
    Infer(&'a mut [ChaCha8Rng]),
}

/// Draws standard-normal link noise for one sample, device `k` from
/// `rngs[k]`.
pub fn draw_link_noise(rngs: &mut [ChaCha8Rng], a_out: usize) -> Vec<Vec<f64>> {
    rngs.iter_mut()
        .map(|rng| (0..a_out).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

fn relu_mask(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Intermediate values of one device's encoder side.
#[derive(Debug, Clone)]
pub struct DeviceTrace {
    /// Inputs of extractor layers 1.. (post-ReLU hidden activations).
    hidden: Vec<Vec<f64>>,
    /// Extractor pre-activations of every hidden layer.
    hidden_pre: Vec<Vec<f64>>,
    pub features: Vec<f64>,
    encoder_input: Vec<f64>,
    pre_code: Vec<f64>,
    pub code: Vec<f64>,
    norm: f64,
    pub received: Vec<f64>,
    /// Per-entry `d received / d code`; `None` means identity.
    link_grad: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub devices: Vec<DeviceTrace>,
    /// Concatenated received features, the decoder input.
    pub received: Vec<f64>,
    dec_pre: Vec<f64>,
    dec_hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub prediction: PredictionDist,
}

fn check_view(view: &[f64], config: &ModelConfig) -> Result<()> {
    if view.len() != config.view_len() {
        return Err(Error::Dimension(format!(
            "view has {} values, model expects {:?}",
            view.len(),
            config.view_shape
        )));
    }
    Ok(())
}

fn extractor_pass(view: &[f64], group: &ParamGroup) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let (last, hidden_layers) = group.layers.split_last().expect("extractor has layers");
    let mut hidden = Vec::with_capacity(hidden_layers.len());
    let mut hidden_pre = Vec::with_capacity(hidden_layers.len());
    let mut x = view.to_vec();
    for layer in hidden_layers {
        let pre = layer.forward(&group.values, &x);
        x = relu(&pre);
        hidden_pre.push(pre);
        hidden.push(x.clone());
    }
    let features = last.forward(&group.values, &x);
    (hidden, hidden_pre, features)
}

/// Semantic extractor for one view.
pub fn sre_forward(view: &Image, params: &ModelParams) -> Result<FeatureVector> {
    let (c, h, w) = view.shape();
    if (c, h, w) != params.config.view_shape {
        return Err(Error::Dimension(format!(
            "view shape {:?} != configured {:?}",
            (c, h, w),
            params.config.view_shape
        )));
    }
    Ok(FeatureVector(extractor_pass(view.data(), &params.sre).2))
}

struct EncoderOut {
    encoder_input: Vec<f64>,
    pre_code: Vec<f64>,
    code: Vec<f64>,
    norm: f64,
}

fn encoder_pass(f: &[f64], group: &ParamGroup, config: &ModelConfig) -> EncoderOut {
    let encoder_input = relu(f);
    let pre_code = group.layers[0].forward(&group.values, &encoder_input);
    let (code, norm) = match config.mode {
        TransmissionMode::Analog => {
            let mean_sq = pre_code.iter().map(|v| v * v).sum::<f64>() / pre_code.len() as f64;
            let norm = (mean_sq + NORM_EPS).sqrt();
            (pre_code.iter().map(|v| v / norm).collect(), norm)
        }
        TransmissionMode::Digital => {
            let mid = 0.5 * (config.z_max + config.z_min);
            let half = 0.5 * (config.z_max - config.z_min);
            (pre_code.iter().map(|v| mid + half * v.tanh()).collect(), 1.0)
        }
    };
    EncoderOut {
        encoder_input,
        pre_code,
        code,
        norm,
    }
}

/// Compress-and-channel encoder: ReLU, affine map to `a_out`, then power
/// normalisation (analog) or smooth bounding into `(z_min, z_max)` (digital).
pub fn cce_forward(f: &FeatureVector, params: &ModelParams) -> Result<CodedFeature> {
    if f.0.len() != params.config.a_in {
        return Err(Error::Dimension(format!(
            "feature length {} != a_in {}",
            f.0.len(),
            params.config.a_in
        )));
    }
    let out = encoder_pass(&f.0, &params.cce, &params.config);
    Ok(CodedFeature {
        values: out.code,
        power_normalized: params.config.mode == TransmissionMode::Analog,
    })
}

fn decoder_pass(z: &[f64], group: &ParamGroup) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pre = group.layers[0].forward(&group.values, z);
    let hidden = relu(&pre);
    let logits = group.layers[1].forward(&group.values, &hidden);
    (pre, hidden, logits)
}

/// Server-side decoder over the concatenated received features.
pub fn decode(z_concat: &[f64], params: &ModelParams) -> Result<PredictionDist> {
    let expected = params.config.k_devices * params.config.a_out();
    if z_concat.len() != expected {
        return Err(Error::Dimension(format!(
            "decoder input has {} values, expected {expected}",
            z_concat.len()
        )));
    }
    Ok(PredictionDist::from_logits(&decoder_pass(z_concat, &params.decoder).2))
}

/// Runs the full pipeline for one multi-view sample and keeps what the
/// backward pass needs.
pub fn forward_sample(
    params: &ModelParams,
    views: &[Image],
    channel: &ChannelSpec,
    link: Link<'_>,
) -> Result<SampleTrace> {
    let config = &params.config;
    if views.len() != config.k_devices || channel.k_devices() != config.k_devices {
        return Err(Error::Dimension(format!(
            "{} views / {} links for a {}-device model",
            views.len(),
            channel.k_devices(),
            config.k_devices
        )));
    }
    if channel.mode() != config.mode {
        return Err(Error::Config(format!(
            "{} channel used with a {} model",
            channel.mode(),
            config.mode
        )));
    }
    let a_out = config.a_out();
    let mut link = link;
    if let Link::Train(noise) = &link {
        if noise.len() != config.k_devices || noise.iter().any(|n| n.len() != a_out) {
            return Err(Error::Dimension("link noise does not match devices x a_out".into()));
        }
    }
    let mut devices = Vec::with_capacity(views.len());
    for (k, view) in views.iter().enumerate() {
        check_view(view.data(), config)?;
        let (hidden, hidden_pre, features) = extractor_pass(view.data(), &params.sre);
        let enc = encoder_pass(&features, &params.cce, config);
        let sigma = channel.sigma(k);
        let (received, link_grad) = match (&mut link, config.mode) {
            (Link::Train(noise), TransmissionMode::Analog) => (
                enc.code.iter().zip(&noise[k]).map(|(z, n)| z + sigma * n).collect(),
                None,
            ),
            (Link::Train(noise), TransmissionMode::Digital) => {
                let q = channel.quantizer().expect("digital channel has a quantizer");
                let (out, grad) = digital_train_forward(&enc.code, q, sigma, &noise[k])?;
                (out, Some(grad))
            }
            (Link::Infer(rngs), TransmissionMode::Analog) => (awgn(&enc.code, sigma, &mut rngs[k])?, None),
            (Link::Infer(rngs), TransmissionMode::Digital) => {
                let q = channel.quantizer().expect("digital channel has a quantizer");
                (digital_infer_forward(&enc.code, q, sigma, &mut rngs[k])?, None)
            }
        };
        devices.push(DeviceTrace {
            hidden,
            hidden_pre,
            features,
            encoder_input: enc.encoder_input,
            pre_code: enc.pre_code,
            code: enc.code,
            norm: enc.norm,
            received,
            link_grad,
        });
    }
    let received: Vec<f64> = devices.iter().flat_map(|d| d.received.iter().copied()).collect();
    let (dec_pre, dec_hidden, logits) = decoder_pass(&received, &params.decoder);
    let prediction = PredictionDist::from_logits(&logits);
    Ok(SampleTrace {
        devices,
        received,
        dec_pre,
        dec_hidden,
        logits,
        prediction,
    })
}

fn layer_backward(
    layer: &LayerShape,
    group: &ParamGroup,
    x: &[f64],
    dy: &[f64],
    grad: &mut [f64],
    want_dx: bool,
) -> Vec<f64> {
    layer.backward(&group.values, x, dy, grad, want_dx)
}

/// Accumulates parameter gradients for one sample.
///
/// `d_logits` is the loss gradient at the decoder output; `d_received` an
/// optional extra gradient on the concatenated received features (from
/// feature-space losses).
pub fn backward_sample(
    params: &ModelParams,
    views: &[Image],
    trace: &SampleTrace,
    d_logits: &[f64],
    d_received: Option<&[f64]>,
    grads: &mut ModelGrads,
) {
    let config = &params.config;
    let dec = &params.decoder;
    let mut d_hidden = layer_backward(&dec.layers[1], dec, &trace.dec_hidden, d_logits, &mut grads.decoder, true);
    relu_mask(&trace.dec_pre, &mut d_hidden);
    let mut d_z = layer_backward(&dec.layers[0], dec, &trace.received, &d_hidden, &mut grads.decoder, true);
    if let Some(extra) = d_received {
        for (a, b) in d_z.iter_mut().zip(extra) {
            *a += b;
        }
    }
    let a_out = config.a_out();
    for (k, dev) in trace.devices.iter().enumerate() {
        let mut d_code = d_z[k * a_out..(k + 1) * a_out].to_vec();
        if let Some(lg) = &dev.link_grad {
            for (d, g) in d_code.iter_mut().zip(lg) {
                *d *= g;
            }
        }
        let d_pre: Vec<f64> = match config.mode {
            TransmissionMode::Analog => {
                let proj = dev.code.iter().zip(&d_code).map(|(z, d)| z * d).sum::<f64>() / a_out as f64;
                dev.code
                    .iter()
                    .zip(&d_code)
                    .map(|(z, d)| (d - z * proj) / dev.norm)
                    .collect()
            }
            TransmissionMode::Digital => {
                let half = 0.5 * (config.z_max - config.z_min);
                dev.pre_code
                    .iter()
                    .zip(&d_code)
                    .map(|(p, d)| {
                        let t = p.tanh();
                        d * half * (1.0 - t * t)
                    })
                    .collect()
            }
        };
        let cce = &params.cce;
        let mut d_f = layer_backward(&cce.layers[0], cce, &dev.encoder_input, &d_pre, &mut grads.cce, true);
        relu_mask(&dev.features, &mut d_f);

        let sre = &params.sre;
        let n = sre.layers.len();
        let mut dy = d_f;
        for li in (0..n).rev() {
            let x: &[f64] = if li == 0 { views[k].data() } else { &dev.hidden[li - 1] };
            let mut dx = layer_backward(&sre.layers[li], sre, x, &dy, &mut grads.sre, li > 0);
            if li > 0 {
                relu_mask(&dev.hidden_pre[li - 1], &mut dx);
            }
            dy = dx;
        }
    }
}
