//! Versioned binary checkpoints.
//!
//! Layout: `SEMCKPT\0 | u32 version | json(header) | 3 × (f64 base_lr,
//! f64[] values) | crc32`. The header carries the architecture and the
//! training seed; layer shapes are recomputed from it on load and every
//! buffer length is checked against them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{GroupId, GroupRates, ModelConfig, ModelParams};
use crate::binfmt::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEMCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    a_out: usize,
    seed: u64,
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, seed: u64) -> Result<()> {
    let header = Header {
        config: params.config.clone(),
        a_out: params.config.a_out(),
        seed,
    };
    let mut w = ByteWriter::new(MAGIC, VERSION);
    w.bytes(&serde_json::to_vec(&header).expect("header serialises"));
    for g in params.groups() {
        w.f64s(&[g.base_lr]);
        w.f64s(&g.values);
    }
    w.write_to(path)
}

/// Loads a checkpoint, returning the parameters and the recorded seed.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, u64)> {
    let data = read_file(path)?;
    let mut r = ByteReader::open(&data, path, MAGIC, VERSION)?;
    let header: Header = serde_json::from_slice(r.bytes()?)
        .map_err(|e| Error::format(path, format!("header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if header.a_out != header.config.a_out() {
        return Err(Error::format(path, "stored a_out disagrees with compression rate"));
    }
    let mut params = ModelParams::zeros(&header.config, GroupRates::default())?;
    for id in GroupId::ALL {
        let lr = r.f64s()?;
        let values = r.f64s()?;
        let group = params.group_mut(id);
        if lr.len() != 1 || values.len() != group.values.len() {
            return Err(Error::format(
                path,
                format!(
                    "{} group holds {} values, architecture needs {}",
                    id.name(),
                    values.len(),
                    group.values.len()
                ),
            ));
        }
        group.base_lr = lr[0];
        group.values = values;
    }
    r.finish()?;
    Ok((params, header.seed))
}

/// Loads a checkpoint and rejects it unless its architecture equals
/// `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<(ModelParams, u64)> {
    let (params, seed) = load_checkpoint(path)?;
    if &params.config != expected {
        return Err(Error::format(
            path,
            format!(
                "architecture mismatch: checkpoint has {:?}, expected {:?}",
                params.config, expected
            ),
        ));
    }
    Ok((params, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejections() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, GroupRates::default(), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &p, 11).unwrap();
        let (q, seed) = load_checkpoint_for(&path, &cfg).unwrap();
        assert_eq!(seed, 11);
        assert_eq!(q, p);

        let other = ModelConfig {
            cr: 0.25,
            ..cfg.clone()
        };
        assert!(matches!(load_checkpoint_for(&path, &other), Err(Error::Format { .. })));

        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));

        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load_checkpoint(&path).is_err());
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
