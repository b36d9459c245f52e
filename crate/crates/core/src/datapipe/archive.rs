//! Single-file archive for synthetic transfer tasks. The header embeds the
//! generator spec and seed so an archive can always be regenerated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Domain, DomainDataset, MultiViewSample};
use super::image::Image;
use super::synth::SynthSpec;
use crate::binfmt::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEMDSET\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub seed: u64,
    pub spec: SynthSpec,
    pub n_per_class: usize,
    pub classes: usize,
    pub k_devices: usize,
}

fn write_domain(w: &mut ByteWriter, ds: &DomainDataset) {
    w.u64(ds.len() as u64);
    for s in ds.samples() {
        match s.label() {
            Some(l) => {
                w.u8(1);
                w.u64(l as u64);
            }
            None => w.u8(0),
        }
        w.u32(s.k_devices() as u32);
        for v in s.views() {
            let (c, h, wd) = v.shape();
            w.u32(c as u32);
            w.u32(h as u32);
            w.u32(wd as u32);
            w.f64s(v.data());
        }
    }
    match ds.truths() {
        Some(t) if ds.domain() == Domain::Target => {
            w.u8(1);
            for l in t {
                w.u64(l as u64);
            }
        }
        _ => w.u8(0),
    }
}

fn read_domain(r: &mut ByteReader, domain: Domain, classes: usize) -> Result<DomainDataset> {
    let n = r.len()?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let label = match r.u8()? {
            0 => None,
            1 => Some(r.len()?),
            _ => return Err(Error::format(r.path(), "bad label flag")),
        };
        let k = r.u32()? as usize;
        let mut views = Vec::with_capacity(k);
        for _ in 0..k {
            let (c, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            views.push(Image::new(c, h, w, r.f64s()?)?);
        }
        samples.push(MultiViewSample::new(views, label, domain)?);
    }
    let eval = match r.u8()? {
        0 => None,
        1 => Some((0..n).map(|_| r.len()).collect::<Result<Vec<_>>>()?),
        _ => return Err(Error::format(r.path(), "bad eval-label flag")),
    };
    DomainDataset::new(samples, classes, domain, eval)
}

pub fn save_archive(
    path: &Path,
    header: &ArchiveHeader,
    source: &DomainDataset,
    target: &DomainDataset,
) -> Result<()> {
    let mut w = ByteWriter::new(MAGIC, VERSION);
    let json = serde_json::to_vec(header).expect("header serialises");
    w.bytes(&json);
    write_domain(&mut w, source);
    write_domain(&mut w, target);
    w.write_to(path)
}

pub fn load_archive(path: &Path) -> Result<(ArchiveHeader, DomainDataset, DomainDataset)> {
    let data = read_file(path)?;
    let mut r = ByteReader::open(&data, path, MAGIC, VERSION)?;
    let header: ArchiveHeader = serde_json::from_slice(r.bytes()?)
        .map_err(|e| Error::format(path, format!("header: {e}")))?;
    let source = read_domain(&mut r, Domain::Source, header.classes)?;
    let target = read_domain(&mut r, Domain::Target, header.classes)?;
    r.finish()?;
    Ok((header, source, target))
}
