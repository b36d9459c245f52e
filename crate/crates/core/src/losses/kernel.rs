use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    Fixed,
    MedianHeuristic,
}

/// Gaussian kernel bandwidth `sigma_b` and how it is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: f64,
    pub mode: BandwidthMode,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            bandwidth: 1.0,
            mode: BandwidthMode::MedianHeuristic,
        }
    }
}

impl KernelSpec {
    pub fn fixed(bandwidth: f64) -> Self {
        KernelSpec {
            bandwidth,
            mode: BandwidthMode::Fixed,
        }
    }

    /// Bandwidth to use for a batch; the median heuristic runs over the
    /// pooled points.
    pub fn resolve(&self, pooled: &[&[f64]]) -> Result<f64> {
        match self.mode {
            BandwidthMode::Fixed if self.bandwidth > 0.0 => Ok(self.bandwidth),
            BandwidthMode::Fixed => Err(Error::OutOfRange(format!(
                "fixed bandwidth {} must be > 0",
                self.bandwidth
            ))),
            BandwidthMode::MedianHeuristic => median_bandwidth(pooled),
        }
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-|x1 - x2|^2 / (2 sigma_b^2))`.
pub fn gaussian_kernel(x1: &[f64], x2: &[f64], bandwidth: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::Dimension(format!("kernel inputs of length {} and {}", x1.len(), x2.len())));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::OutOfRange(format!("kernel bandwidth {bandwidth} must be positive and finite")));
    }
    Ok((-squared_distance(x1, x2) / (2.0 * bandwidth * bandwidth)).exp())
}

/// `sigma_b^2 = median(pairwise squared distances) / 2`, falling back to
/// 1 when the median is zero.
pub fn median_bandwidth(samples: &[&[f64]]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Empty("median bandwidth needs at least 2 samples".into()));
    }
    let mut d = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            d.push(squared_distance(samples[i], samples[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    if median > 0.0 && median.is_finite() {
        Ok((median / 2.0).sqrt())
    } else {
        Ok(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(gaussian_kernel(&[1.0, -2.0], &[1.0, -2.0], 0.3).unwrap(), 1.0);
        // |d|^2 = 2 sigma^2 -> e^-1
        let s: f64 = 0.7;
        let d = (2.0f64).sqrt() * s;
        assert_relative_eq!(gaussian_kernel(&[0.0, 0.0], &[d, 0.0], s).unwrap(), 0.367_879_441_171_442_3, epsilon = 1e-12);
        assert!(gaussian_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn median_examples() {
        let a = [0.0, 0.0];
        let b = [3.0, 4.0];
        assert_relative_eq!(median_bandwidth(&[&a, &b]).unwrap().powi(2), 12.5, epsilon = 1e-12);
        let same = [1.0, 1.0];
        assert_eq!(median_bandwidth(&[&same, &same, &same]).unwrap(), 1.0);
        assert!(median_bandwidth(&[&a]).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_bounded(a in prop::collection::vec(-3.0f64..3.0, 4), b in prop::collection::vec(-3.0f64..3.0, 4), s in 0.1f64..3.0) {
            let k1 = gaussian_kernel(&a, &b, s).unwrap();
            let k2 = gaussian_kernel(&b, &a, s).unwrap();
            prop_assert_eq!(k1, k2);
            // may underflow to 0 for far-apart points and tiny bandwidths
            prop_assert!((0.0..=1.0).contains(&k1));
        }

        #[test]
        fn median_scales_with_data(pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 3..7), c in 0.1f64..5.0) {
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let s1 = median_bandwidth(&refs).unwrap();
            let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * c).collect()).collect();
            let refs2: Vec<&[f64]> = scaled.iter().map(|p| p.as_slice()).collect();
            let s2 = median_bandwidth(&refs2).unwrap();
            if s1 != 1.0 || s2 != 1.0 {
                prop_assert!((s2 - c * s1).abs() < 1e-9 * s2.max(1.0));
            }
        }
    }
}
