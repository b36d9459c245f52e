//! Extractor, encoder and decoder networks with exact gradients.

mod checkpoint;
mod network;
mod params;
mod prediction;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use network::{
    backward_sample, cce_forward, decode, draw_link_noise, forward_sample, sre_forward, CodedFeature,
    DeviceTrace, FeatureVector, Link, SampleTrace,
};
pub use params::{
    compressed_width, GroupId, GroupRates, LayerShape, ModelConfig, ModelGrads, ModelParams, ParamGroup,
};
pub use prediction::{argmax, one_hot, predict_label, softmax_backward, PredictionDist};
