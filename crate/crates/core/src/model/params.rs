use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::TransmissionMode;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Architecture hyperparameters shared by every network in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Per-device view shape `(channels, height, width)`.
    pub view_shape: (usize, usize, usize),
    /// Hidden widths of the extractor's dense stack.
    pub extractor_hidden: Vec<usize>,
    /// Extractor output width.
    pub a_in: usize,
    /// Compression rate `a_out / a_in`.
    pub cr: f64,
    pub decoder_hidden: usize,
    pub classes: usize,
    pub k_devices: usize,
    pub mode: TransmissionMode,
    /// Range of the bounded encoder output in digital mode.
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            view_shape: (3, 8, 8),
            extractor_hidden: vec![48],
            a_in: 64,
            cr: 0.1,
            decoder_hidden: 256,
            classes: 5,
            k_devices: 4,
            mode: TransmissionMode::Analog,
            z_min: -1.0,
            z_max: 1.0,
        }
    }
}

/// `floor(cr * a_in + 0.5)`, at least 1.
pub fn compressed_width(a_in: usize, cr: f64) -> usize {
    ((cr * a_in as f64 + 0.5).floor() as usize).max(1)
}

impl ModelConfig {
    pub fn a_out(&self) -> usize {
        compressed_width(self.a_in, self.cr)
    }

    pub fn view_len(&self) -> usize {
        self.view_shape.0 * self.view_shape.1 * self.view_shape.2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cr > 0.0 && self.cr <= 1.0) {
            return Err(Error::Config(format!("compression rate {} not in (0, 1]", self.cr)));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.k_devices == 0 || self.a_in == 0 || self.decoder_hidden == 0 || self.view_len() == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.extractor_hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("extractor hidden widths must be positive".into()));
        }
        if !(self.z_min < self.z_max) {
            return Err(Error::Config("encoder bounds must satisfy z_min < z_max".into()));
        }
        Ok(())
    }

    fn extractor_layers(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.view_len()];
        widths.extend(&self.extractor_hidden);
        widths.push(self.a_in);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn encoder_layers(&self) -> Vec<(usize, usize)> {
        vec![(self.a_in, self.a_out())]
    }

    fn decoder_layers(&self) -> Vec<(usize, usize)> {
        vec![
            (self.k_devices * self.a_out(), self.decoder_hidden),
            (self.decoder_hidden, self.classes),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupId {
    Extractor,
    Encoder,
    Decoder,
}

impl GroupId {
    pub const ALL: [GroupId; 3] = [GroupId::Extractor, GroupId::Encoder, GroupId::Decoder];

    pub fn name(self) -> &'static str {
        match self {
            GroupId::Extractor => "sre",
            GroupId::Encoder => "cce",
            GroupId::Decoder => "decoder",
        }
    }
}

/// Location of one dense layer inside a group's flat buffer. Weights are
/// row-major `out × in`, followed by `out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    pub fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    /// `y = W x + b`.
    pub fn forward(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &values[self.weight_range()];
        let b = &values[self.bias_range()];
        (0..self.outputs)
            .map(|o| {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `d/dx`.
    pub fn backward(&self, values: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64], want_dx: bool) -> Vec<f64> {
        let w = &values[self.weight_range()];
        let (gw, gb) = grad[self.offset..self.offset + self.len()].split_at_mut(self.inputs * self.outputs);
        let mut dx = if want_dx { vec![0.0; self.inputs] } else { Vec::new() };
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += d * xi;
            }
            if want_dx {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                for (dxi, wi) in dx.iter_mut().zip(row) {
                    *dxi += d * wi;
                }
            }
        }
        dx
    }
}

/// One disjoint slice of the network's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub id: GroupId,
    pub layers: Vec<LayerShape>,
    pub values: Vec<f64>,
    /// Initial learning rate for this group.
    pub base_lr: f64,
}

impl ParamGroup {
    fn with_layers(id: GroupId, dims: &[(usize, usize)], base_lr: f64) -> Self {
        let mut offset = 0;
        let layers = dims
            .iter()
            .map(|&(inputs, outputs)| {
                let l = LayerShape {
                    inputs,
                    outputs,
                    offset,
                };
                offset += l.len();
                l
            })
            .collect();
        ParamGroup {
            id,
            layers,
            values: vec![0.0; offset],
            base_lr,
        }
    }

    /// He-normal weights, zero biases.
    fn init<R: Rng>(&mut self, rng: &mut R) {
        for layer in &self.layers {
            let std = (2.0 / layer.inputs as f64).sqrt();
            for v in &mut self.values[layer.weight_range()] {
                let n: f64 = StandardNormal.sample(rng);
                *v = std * n;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Learning rates per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub sre: f64,
    pub cce: f64,
    pub decoder: f64,
}

impl Default for GroupRates {
    fn default() -> Self {
        GroupRates {
            sre: 1e-3,
            cce: 1e-2,
            decoder: 1e-2,
        }
    }
}

impl GroupRates {
    pub fn get(&self, id: GroupId) -> f64 {
        match id {
            GroupId::Extractor => self.sre,
            GroupId::Encoder => self.cce,
            GroupId::Decoder => self.decoder,
        }
    }
}

/// Full parameter set: extractor, encoder and decoder groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub sre: ParamGroup,
    pub cce: ParamGroup,
    pub decoder: ParamGroup,
}

impl ModelParams {
    /// Zero-valued parameters with the layout implied by `config`.
    pub fn zeros(config: &ModelConfig, rates: GroupRates) -> Result<Self> {
        config.validate()?;
        Ok(ModelParams {
            sre: ParamGroup::with_layers(GroupId::Extractor, &config.extractor_layers(), rates.sre),
            cce: ParamGroup::with_layers(GroupId::Encoder, &config.encoder_layers(), rates.cce),
            decoder: ParamGroup::with_layers(GroupId::Decoder, &config.decoder_layers(), rates.decoder),
            config: config.clone(),
        })
    }

    pub fn init(config: &ModelConfig, rates: GroupRates, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config, rates)?;
        let mut rng = substream(seed, Stream::Init);
        params.sre.init(&mut rng);
        params.cce.init(&mut rng);
        params.decoder.init(&mut rng);
        Ok(params)
    }

    pub fn group(&self, id: GroupId) -> &ParamGroup {
        match id {
            GroupId::Extractor => &self.sre,
            GroupId::Encoder => &self.cce,
            GroupId::Decoder => &self.decoder,
        }
    }

    pub fn group_mut(&mut self, id: GroupId) -> &mut ParamGroup {
        match id {
            GroupId::Extractor => &mut self.sre,
            GroupId::Encoder => &mut self.cce,
            GroupId::Decoder => &mut self.decoder,
        }
    }

    pub fn groups(&self) -> [&ParamGroup; 3] {
        [&self.sre, &self.cce, &self.decoder]
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    /// All parameters concatenated in group order.
    pub fn flatten(&self) -> Vec<f64> {
        self.groups().iter().flat_map(|g| g.values.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "flat vector has {} values, model has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut rest = flat;
        for id in GroupId::ALL {
            let g = self.group_mut(id);
            let (head, tail) = rest.split_at(g.values.len());
            g.values.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Order-sensitive digest of every parameter bit pattern.
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for g in self.groups() {
            for v in &g.values {
                h.update(&v.to_bits().to_le_bytes());
            }
        }
        h.finalize()
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.values.iter().all(|v| v.is_finite()))
    }
}

/// Gradient buffers laid out like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub sre: Vec<f64>,
    pub cce: Vec<f64>,
    pub decoder: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrads {
            sre: vec![0.0; params.sre.len()],
            cce: vec![0.0; params.cce.len()],
            decoder: vec![0.0; params.decoder.len()],
        }
    }

    pub fn group(&self, id: GroupId) -> &[f64] {
        match id {
            GroupId::Extractor => &self.sre,
            GroupId::Encoder => &self.cce,
            GroupId::Decoder => &self.decoder,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        [&self.sre[..], &self.cce[..], &self.decoder[..]].concat()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.sre.iter_mut().chain(&mut self.cce).chain(&mut self.decoder) {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sre.iter().chain(&self.cce).chain(&self.decoder).all(|v| v.is_finite())
    }
}
