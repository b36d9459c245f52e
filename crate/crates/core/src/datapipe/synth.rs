//! Synthetic multi-view transfer task with a controllable covariate shift.
//!
//! Each scene is a point `u` in a 2-D class latent (class centres evenly
//! spaced on a circle). A fixed random renderer, shared by both domains,
//! turns `u` into a `3×S×S` canvas through a per-pixel linear read-out and a
//! sigmoid. The target domain perturbs the scene before and during
//! rendering: a latent rotation and translation, a contrast change, a
//! per-channel colour cast and an additive background texture whose
//! strength varies per image.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Domain, DomainDataset, MultiViewSample};
use super::image::{split_views, Image};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

const CHANNELS: usize = 3;

/// How the target domain departs from the source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftParams {
    pub rotation_deg: f64,
    pub latent_shift: [f64; 2],
    pub contrast: f64,
    pub color_cast: [f64; 3],
    pub background: f64,
}

impl Default for ShiftParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl ShiftParams {
    pub fn identity() -> Self {
        ShiftParams {
            rotation_deg: 0.0,
            latent_shift: [0.0, 0.0],
            contrast: 1.0,
            color_cast: [0.0; 3],
            background: 0.0,
        }
    }

    /// The nuisance shift of the reference transfer task: background
    /// clutter, a colour cast and reduced contrast, with the class geometry
    /// left intact.
    pub fn reference() -> Self {
        ShiftParams {
            rotation_deg: 0.0,
            latent_shift: [0.0, 0.0],
            contrast: 0.7,
            color_cast: [1.2, -1.0, 0.8],
            background: 1.2,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Side of the square canvas before view splitting.
    pub canvas: usize,
    pub view_size: usize,
    pub class_radius: f64,
    pub cluster_spread: f64,
    /// Gain of the latent-to-pixel read-out.
    pub render_gain: f64,
    pub pixel_noise: f64,
    pub shift: ShiftParams,
}

impl SynthSpec {
    /// Default rendering with the reference target shift.
    pub fn reference() -> Self {
        SynthSpec {
            shift: ShiftParams::reference(),
            ..SynthSpec::default()
        }
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            canvas: 12,
            view_size: 8,
            class_radius: 2.0,
            cluster_spread: 0.45,
            render_gain: 0.8,
            pixel_noise: 0.25,
            shift: ShiftParams::identity(),
        }
    }
}

/// Per-pixel read-out weights and biases shared by both domains, plus the
/// target background texture.
struct Renderer {
    readout: Vec<[f64; 2]>,
    bias: Vec<f64>,
    texture: Vec<f64>,
}

impl Renderer {
    fn new(pixels: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        let readout = (0..pixels).map(|_| [gain * normal(), gain * normal()]).collect();
        let bias = (0..pixels).map(|_| 0.3 * normal()).collect();
        let texture = (0..pixels).map(|_| normal()).collect();
        Renderer {
            readout,
            bias,
            texture,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn class_center(class: usize, classes: usize, radius: f64) -> [f64; 2] {
    let angle = std::f64::consts::TAU * class as f64 / classes as f64;
    [radius * angle.cos(), radius * angle.sin()]
}

#[allow(clippy::too_many_arguments)]
fn render_domain(
    spec: &SynthSpec,
    renderer: &Renderer,
    domain: Domain,
    n_per_class: usize,
    classes: usize,
    k_devices: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<MultiViewSample>, Vec<usize>)> {
    let side = spec.canvas;
    let plane = side * side;
    let shift = match domain {
        Domain::Source => ShiftParams::identity(),
        Domain::Target => spec.shift.clone(),
    };
    let (sin, cos) = shift.rotation_deg.to_radians().sin_cos();
    let mut samples = Vec::with_capacity(n_per_class * classes);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    for i in 0..n_per_class * classes {
        let class = i % classes;
        let center = class_center(class, classes, spec.class_radius);
        let mut u = [0.0; 2];
        for (d, c) in u.iter_mut().zip(center) {
            let eps: f64 = StandardNormal.sample(rng);
            *d = c + spec.cluster_spread * eps;
        }
        let u = [
            cos * u[0] - sin * u[1] + shift.latent_shift[0],
            sin * u[0] + cos * u[1] + shift.latent_shift[1],
        ];
        let texture_amp = if shift.background != 0.0 {
            shift.background * rng.random_range(0.5..1.5)
        } else {
            0.0
        };
        let mut data = Vec::with_capacity(CHANNELS * plane);
        for ch in 0..CHANNELS {
            for p in 0..plane {
                let idx = ch * plane + p;
                let w = renderer.readout[idx];
                let signal = shift.contrast * (w[0] * u[0] + w[1] * u[1]);
                let eps: f64 = StandardNormal.sample(rng);
                let pre = signal
                    + renderer.bias[idx]
                    + shift.color_cast[ch]
                    + texture_amp * renderer.texture[idx]
                    + spec.pixel_noise * eps;
                data.push(sigmoid(pre));
            }
        }
        let canvas = Image::new(CHANNELS, side, side, data)?;
        let views = split_views(&canvas, k_devices, spec.view_size)?;
        let label = match domain {
            Domain::Source => Some(class),
            Domain::Target => None,
        };
        samples.push(MultiViewSample::new(views, label, domain)?);
        labels.push(class);
    }
    Ok((samples, labels))
}

/// Generates a labelled source dataset and a target dataset whose labels are
/// held back for evaluation only. Deterministic in `seed`.
pub fn synth_shift_dataset(
    spec: &SynthSpec,
    n_per_class: usize,
    classes: usize,
    k_devices: usize,
    seed: u64,
) -> Result<(DomainDataset, DomainDataset)> {
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
    }
    if n_per_class == 0 {
        return Err(Error::Config("n_per_class must be at least 1".into()));
    }
    let mut rng = substream(seed, Stream::Synth);
    let renderer = Renderer::new(CHANNELS * spec.canvas * spec.canvas, spec.render_gain, &mut rng);
    let (src, _) = render_domain(spec, &renderer, Domain::Source, n_per_class, classes, k_devices, &mut rng)?;
    let (tgt, tgt_labels) =
        render_domain(spec, &renderer, Domain::Target, n_per_class, classes, k_devices, &mut rng)?;
    Ok((
        DomainDataset::new(src, classes, Domain::Source, None)?,
        DomainDataset::new(tgt, classes, Domain::Target, Some(tgt_labels))?,
    ))
}
