//! Experiment configuration: a TOML file layered over built-in defaults,
//! with command-line overrides applied last.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, QuantizerSpec, TransmissionMode};
use crate::datapipe::{class_names, load_archive, load_image_folder, synth_shift_dataset, Domain, DomainDataset, SynthSpec};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    #[default]
    Synthetic,
    /// `source_dir/<class>/*.png` and `target_dir/<class>/*.png`.
    Folder,
    /// A file written by `semedge synth`.
    Archive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub kind: DataKind,
    pub source_dir: Option<PathBuf>,
    pub target_dir: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    /// Scenes per class and domain for synthetic data.
    pub n_per_class: usize,
    pub k_devices: usize,
    pub canvas: usize,
    pub view_size: usize,
    /// Rendering and shift parameters of the synthetic task. Its canvas and
    /// view size are taken from this section.
    pub synth: SynthSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            kind: DataKind::Synthetic,
            source_dir: None,
            target_dir: None,
            archive: None,
            n_per_class: 100,
            k_devices: 4,
            canvas: 12,
            view_size: 8,
            synth: SynthSpec::reference(),
        }
    }
}

/// Preset architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small dense extractor for CPU-scale experiments.
    #[default]
    Desk,
    /// Full-size feature width (2048) with a wide extractor, for folder
    /// datasets with larger canvases.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub profile: Profile,
    pub a_in: Option<usize>,
    pub cr: Option<f64>,
    pub classes: Option<usize>,
    pub extractor_hidden: Option<Vec<usize>>,
    pub decoder_hidden: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub mode: TransmissionMode,
    /// SNR of every link in the source deployment (step 1, teacher).
    pub source_snr_db: f64,
    /// SNR of every link in the target deployment (step 2, evaluation).
    pub target_snr_db: f64,
    /// Required in digital mode, rejected in analog mode.
    pub quantizer: Option<QuantizerSpec>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            mode: TransmissionMode::Analog,
            source_snr_db: 10.0,
            target_snr_db: -10.0,
            quantizer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds data synthesis, initialisation, shuffling and channel noise.
    pub seed: u64,
    pub output: PathBuf,
    pub data: DataSection,
    pub model: ModelSection,
    pub channel: ChannelSection,
    /// Training plan; its `seed` field is replaced by the top-level seed.
    pub train: TrainPlan,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output: PathBuf::from("runs/default"),
            data: DataSection::default(),
            model: ModelSection::default(),
            channel: ChannelSection::default(),
            train: TrainPlan {
                epochs: 30,
                ..TrainPlan::default()
            },
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub finetune_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub source_snr: Option<f64>,
    pub target_snr: Option<f64>,
    pub cr: Option<f64>,
    pub mode: Option<TransmissionMode>,
    pub q_b: Option<u32>,
}

/// Everything a command needs, derived from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelConfig,
    pub plan: TrainPlan,
    pub source_channel: ChannelSpec,
    pub target_channel: ChannelSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
        if let Some(v) = o.lambda {
            self.train.weights.lambda = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.finetune_epochs {
            self.train.finetune_epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.source_snr {
            self.channel.source_snr_db = v;
        }
        if let Some(v) = o.target_snr {
            self.channel.target_snr_db = v;
        }
        if let Some(v) = o.cr {
            self.model.cr = Some(v);
        }
        if let Some(v) = o.mode {
            self.channel.mode = v;
            if v == TransmissionMode::Digital && self.channel.quantizer.is_none() {
                self.channel.quantizer = Some(QuantizerSpec::default());
            }
            if v == TransmissionMode::Analog {
                self.channel.quantizer = None;
            }
        }
        if let Some(v) = o.q_b {
            let q = self.channel.quantizer.get_or_insert_with(QuantizerSpec::default);
            q.q_b = v;
        }
    }

    fn model_config(&self) -> ModelConfig {
        let base = match self.model.profile {
            Profile::Desk => ModelConfig::default(),
            Profile::Paper => ModelConfig {
                extractor_hidden: vec![1024],
                a_in: 2048,
                ..ModelConfig::default()
            },
        };
        let m = &self.model;
        let (z_min, z_max) = self
            .channel
            .quantizer
            .as_ref()
            .map_or((base.z_min, base.z_max), |q| (q.z_min, q.z_max));
        ModelConfig {
            view_shape: (3, self.data.view_size, self.data.view_size),
            extractor_hidden: m.extractor_hidden.clone().unwrap_or(base.extractor_hidden),
            a_in: m.a_in.unwrap_or(base.a_in),
            cr: m.cr.unwrap_or(base.cr),
            decoder_hidden: m.decoder_hidden.unwrap_or(base.decoder_hidden),
            classes: m.classes.unwrap_or(base.classes),
            k_devices: self.data.k_devices,
            mode: self.channel.mode,
            z_min,
            z_max,
        }
    }

    /// Checks cross-field consistency and builds the runtime objects.
    pub fn resolve(&self) -> Result<Resolved> {
        match (self.channel.mode, &self.channel.quantizer) {
            (TransmissionMode::Digital, None) => {
                return Err(Error::Config("digital mode needs a [channel.quantizer] section".into()))
            }
            (TransmissionMode::Analog, Some(_)) => {
                return Err(Error::Config("[channel.quantizer] is only valid in digital mode".into()))
            }
            _ => {}
        }
        let model = self.model_config();
        model.validate()?;
        let plan = TrainPlan {
            seed: self.seed,
            ..self.train.clone()
        };
        plan.validate()?;
        let k = self.data.k_devices;
        let q = self.channel.quantizer.clone();
        Ok(Resolved {
            model,
            plan,
            source_channel: ChannelSpec::uniform(self.channel.source_snr_db, k, self.channel.mode, q.clone())?,
            target_channel: ChannelSpec::uniform(self.channel.target_snr_db, k, self.channel.mode, q)?,
        })
    }

    /// Synthetic task spec with the canvas and view size of this section.
    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            canvas: self.data.canvas,
            view_size: self.data.view_size,
            ..self.data.synth.clone()
        }
    }

    /// Builds or loads the source and target datasets.
    pub fn load_datasets(&self) -> Result<(DomainDataset, DomainDataset)> {
        let d = &self.data;
        let classes = self.model_config().classes;
        let (source, target) = match d.kind {
            DataKind::Synthetic => synth_shift_dataset(&self.synth_spec(), d.n_per_class, classes, d.k_devices, self.seed)?,
            DataKind::Archive => {
                let path = d
                    .archive
                    .as_ref()
                    .ok_or_else(|| Error::Config("data.kind = \"archive\" needs data.archive".into()))?;
                let (_, s, t) = load_archive(path)?;
                (s, t)
            }
            DataKind::Folder => {
                let (src, tgt) = match (&d.source_dir, &d.target_dir) {
                    (Some(s), Some(t)) => (s, t),
                    _ => return Err(Error::Config("data.kind = \"folder\" needs source_dir and target_dir".into())),
                };
                for dir in [src, tgt] {
                    if !dir.is_dir() {
                        return Err(Error::Config(format!("dataset directory {} does not exist", dir.display())));
                    }
                }
                let names = class_names(src)?;
                let s = load_image_folder(src, Domain::Source, &names, d.canvas, d.k_devices, d.view_size)?;
                let t = load_image_folder(tgt, Domain::Target, &names, d.canvas, d.k_devices, d.view_size)?;
                (s, t)
            }
        };
        if source.class_count() != classes {
            return Err(Error::Config(format!(
                "dataset has {} classes but the model is configured for {classes}",
                source.class_count()
            )));
        }
        Ok((source, target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_plan() {
        let c = ExperimentConfig::default();
        let r = c.resolve().unwrap();
        assert_eq!(r.plan.batch_size, 16);
        assert_eq!(r.plan.momentum, 0.9);
        assert_eq!(r.plan.weight_decay, 5e-4);
        assert_eq!((r.plan.lr0.sre, r.plan.lr0.cce, r.plan.lr0.decoder), (1e-3, 1e-2, 1e-2));
        assert_eq!(r.plan.weights.lambda, 0.1);
        assert_eq!(r.plan.finetune_epochs, 20);
        assert_eq!(r.model.a_out(), 6);
    }

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let mut c = ExperimentConfig::from_toml("seed = 7\n[train]\nepochs = 12\n[train.weights]\nlambda = 0.3\n").unwrap();
        assert_eq!(c.train.epochs, 12);
        assert_eq!(c.train.finetune_epochs, 20);
        c.apply(&Overrides {
            lambda: Some(0.0),
            ..Overrides::default()
        });
        assert_eq!(c.train.weights.lambda, 0.0);
        assert_eq!(c.resolve().unwrap().plan.seed, 7);
    }

    #[test]
    fn quantizer_iff_digital() {
        let bad = ExperimentConfig::from_toml("[channel]\nmode = \"digital\"\n").unwrap();
        assert!(matches!(bad.resolve(), Err(Error::Config(_))));
        let bad = ExperimentConfig::from_toml("[channel.quantizer]\nq_b = 2\n").unwrap();
        assert!(bad.resolve().is_err());
        let ok = ExperimentConfig::from_toml("[channel]\nmode = \"digital\"\n[channel.quantizer]\nq_b = 4\n").unwrap();
        let r = ok.resolve().unwrap();
        assert_eq!(r.source_channel.quantizer().unwrap().q_b, 4);
        assert_eq!(r.model.mode, TransmissionMode::Digital);
    }

    #[test]
    fn rejects_bad_values() {
        let c = ExperimentConfig::from_toml("[model]\ncr = 1.5\n").unwrap();
        assert!(c.resolve().is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
        let c = ExperimentConfig::from_toml("[data]\nkind = \"folder\"\nsource_dir = \"/nonexistent\"\ntarget_dir = \"/nonexistent\"\n").unwrap();
        assert!(matches!(c.load_datasets(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply(&Overrides {
            mode: Some(TransmissionMode::Digital),
            q_b: Some(4),
            ..Overrides::default()
        });
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }
}
