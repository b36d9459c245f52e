//! Minimal raster charts: sweep line plots and confusion heatmaps. No text
//! is rendered; the CSV files carry the numbers.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::metrics::ConfusionMatrix;
use super::sweep::SweepResult;
use crate::error::{Error, Result};

const PALETTE: [[u8; 3]; 3] = [[200, 30, 30], [30, 90, 200], [40, 160, 60]];
const MARGIN: u32 = 40;

fn draw_line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (x0 + t * (x1 - x0)).round();
        let y = (y0 + t * (y1 - y0)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Mean accuracy against the axis, one polyline per method, y from 0 to 1.
pub fn plot_sweep(result: &SweepResult, path: &Path) -> Result<()> {
    let (w, h) = (480u32, 320u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let black = Rgb([0, 0, 0]);
    let (left, right) = (MARGIN as f64, (w - MARGIN / 2) as f64);
    let (top, bottom) = ((MARGIN / 2) as f64, (h - MARGIN) as f64);
    draw_line(&mut img, (left, bottom), (right, bottom), black);
    draw_line(&mut img, (left, bottom), (left, top), black);
    let (lo, hi) = (result.axis[0], *result.axis.last().unwrap_or(&result.axis[0]));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let to_px = |a: f64, acc: f64| (left + (a - lo) / span * (right - left), bottom - acc * (bottom - top));
    let points = result.points();
    for (i, method) in result.methods().into_iter().enumerate() {
        let color = Rgb(PALETTE[i % PALETTE.len()]);
        let series: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.method == method)
            .map(|p| to_px(p.axis, p.mean))
            .collect();
        for pair in series.windows(2) {
            draw_line(&mut img, pair[0], pair[1], color);
        }
        for &(x, y) in &series {
            for d in -2i32..=2 {
                draw_line(&mut img, (x + d as f64, y - 2.0), (x + d as f64, y + 2.0), color);
            }
        }
    }
    save(&img, path)
}

/// Row-normalised confusion heatmap, darker meaning more mass.
pub fn plot_confusion(matrix: &ConfusionMatrix, path: &Path) -> Result<()> {
    let c = matrix.classes().max(1) as u32;
    let cell = (320 / c).max(4);
    let mut img = RgbImage::new(c * cell, c * cell);
    for (i, row) in matrix.counts.iter().enumerate() {
        let total = row.iter().sum::<u64>().max(1) as f64;
        for (j, &v) in row.iter().enumerate() {
            let shade = 255 - (255.0 * v as f64 / total).round() as u8;
            for y in 0..cell {
                for x in 0..cell {
                    img.put_pixel(j as u32 * cell + x, i as u32 * cell + y, Rgb([shade, shade, 255]));
                }
            }
        }
    }
    save(&img, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{confusion_matrix, snr_sweep, Method};

    #[test]
    fn writes_png_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = snr_sweep("p", &[-5.0, 0.0, 5.0], &[Method::Dasein, Method::TestD], &[0], 1, |m, a, _| {
            Ok(vec![0.5 + a / 20.0 - if m == Method::TestD { 0.2 } else { 0.0 }])
        })
        .unwrap();
        let p = dir.path().join("s.png");
        plot_sweep(&s, &p).unwrap();
        let m = confusion_matrix(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        let q = dir.path().join("c.png");
        plot_confusion(&m, &q).unwrap();
        assert_eq!(image::open(&p).unwrap().width(), 480);
        assert_eq!(image::open(&q).unwrap().width(), 320);
    }
}
