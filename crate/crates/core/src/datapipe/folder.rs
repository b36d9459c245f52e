//! Ingestion of `root/<class_name>/<image files>` trees.

use std::path::{Path, PathBuf};

use super::dataset::{Domain, DomainDataset, MultiViewSample};
use super::image::{split_views, Image};
use crate::error::{Error, Result};

const EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

/// Class directories sorted by name; the sort order defines class indices.
pub fn class_names(root: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Decodes an image file, resizes its short side to `canvas` and centre
/// crops to `canvas×canvas`, with intensities scaled to `[0, 1]`.
pub fn load_canvas(path: &Path, canvas: usize) -> Result<Image> {
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    let scale = canvas as f64 / w.min(h);
    let (nw, nh) = (
        ((w * scale).round() as u32).max(canvas as u32),
        ((h * scale).round() as u32).max(canvas as u32),
    );
    let rgb = img
        .resize_exact(nw, nh, image::imageops::FilterType::Triangle)
        .to_rgb8();
    let (top, left) = ((nh as usize - canvas) / 2, (nw as usize - canvas) / 2);
    let mut out = Image::zeros(3, canvas, canvas);
    for row in 0..canvas {
        for col in 0..canvas {
            let px = rgb.get_pixel((left + col) as u32, (top + row) as u32);
            for ch in 0..3 {
                out.set(ch, row, col, f64::from(px[ch]) / 255.0);
            }
        }
    }
    Ok(out)
}

/// Loads a directory dataset. Source datasets keep labels; target datasets
/// keep them only as evaluation labels. `classes` pins the class list
/// (typically the source's) so indices agree across domains.
pub fn load_image_folder(
    root: &Path,
    domain: Domain,
    classes: &[String],
    canvas: usize,
    k_devices: usize,
    view_size: usize,
) -> Result<DomainDataset> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (label, name) in classes.iter().enumerate() {
        let dir = root.join(name);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();
        for file in files {
            let views = split_views(&load_canvas(&file, canvas)?, k_devices, view_size)?;
            let train_label = (domain == Domain::Source).then_some(label);
            samples.push(MultiViewSample::new(views, train_label, domain)?);
            labels.push(label);
        }
    }
    if samples.is_empty() {
        return Err(Error::Data(format!("no images found under {}", root.display())));
    }
    let eval = (domain == Domain::Target).then_some(labels);
    DomainDataset::new(samples, classes.len(), domain, eval)
}
