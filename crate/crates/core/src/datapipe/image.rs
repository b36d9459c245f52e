use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A channel-major (`Ch×H×W`) image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "image buffer has {} values, expected {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Flat channel-major pixel buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, ch: usize, row: usize, col: usize) -> f64 {
        self.data[(ch * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, ch: usize, row: usize, col: usize, value: f64) {
        self.data[(ch * self.height + row) * self.width + col] = value;
    }

    /// Copies the `size×size` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, size: usize) -> Result<Image> {
        if top + size > self.height || left + size > self.width {
            return Err(Error::Dimension(format!(
                "crop {size}x{size} at ({top},{left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * size * size);
        for ch in 0..self.channels {
            for row in top..top + size {
                let start = (ch * self.height + row) * self.width + left;
                data.extend_from_slice(&self.data[start..start + size]);
            }
        }
        Ok(Image {
            channels: self.channels,
            height: size,
            width: size,
            data,
        })
    }
}

/// Splits a canvas into the per-device views.
///
/// With four devices the views are the four corner crops, anchored at
/// `{0, H-size} x {0, W-size}` in row-major order (top-left, top-right,
/// bottom-left, bottom-right). A single device sees the centre crop.
pub fn split_views(image: &Image, k_devices: usize, view_size: usize) -> Result<Vec<Image>> {
    if view_size == 0 || view_size > image.height || view_size > image.width {
        return Err(Error::Dimension(format!(
            "view size {view_size} does not fit a {}x{} image",
            image.height, image.width
        )));
    }
    let bottom = image.height - view_size;
    let right = image.width - view_size;
    match k_devices {
        1 => Ok(vec![image.crop(bottom / 2, right / 2, view_size)?]),
        4 => [(0, 0), (0, right), (bottom, 0), (bottom, right)]
            .iter()
            .map(|&(top, left)| image.crop(top, left, view_size))
            .collect(),
        k => Err(Error::Config(format!(
            "unsupported device count {k}; views are defined for 1 or 4 devices"
        ))),
    }
}
