use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Adds i.i.d. `N(0, sigma^2)` noise to every entry. `sigma == 0` is the
/// noiseless bypass: the input is returned unchanged and the generator is
/// not advanced.
pub fn awgn<R: Rng + ?Sized>(z: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::OutOfRange(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(z.to_vec());
    }
    Ok(z
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(rng);
            v + sigma * n
        })
        .collect())
}

/// Concatenates the received per-device vectors in device order.
pub fn concat_views(received: &[Vec<f64>]) -> Result<Vec<f64>> {
    let len = received
        .first()
        .ok_or_else(|| Error::Empty("no device vectors to concatenate".into()))?
        .len();
    if received.iter().any(|v| v.len() != len) {
        return Err(Error::Dimension("device vectors differ in length".into()));
    }
    Ok(received.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn bypass_is_exact() {
        let mut rng = substream(1, Stream::Eval);
        let z = vec![0.3, -1.2, 2.0];
        assert_eq!(awgn(&z, 0.0, &mut rng).unwrap(), z);
        assert!(awgn(&z, -1.0, &mut rng).is_err());
    }

    #[test]
    fn seeded_noise_repeats() {
        let z = vec![0.0; 16];
        let a = awgn(&z, 0.5, &mut substream(3, Stream::Eval)).unwrap();
        let b = awgn(&z, 0.5, &mut substream(3, Stream::Eval)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, z);
    }

    #[test]
    fn noise_variance_and_device_independence() {
        let n = 100_000;
        let sigma = 0.7;
        let z = vec![0.0; n];
        let a = awgn(&z, sigma, &mut substream(9, Stream::Channel { phase: 0, device: 0 })).unwrap();
        let b = awgn(&z, sigma, &mut substream(9, Stream::Channel { phase: 0, device: 1 })).unwrap();
        let var = a.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "variance ratio {}", var / (sigma * sigma));
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (n as f64 * sigma * sigma);
        assert!(corr.abs() < 0.02, "cross-correlation {corr}");
    }

    #[test]
    fn concat_in_device_order() {
        let parts = vec![vec![1.0; 204], vec![2.0; 204], vec![3.0; 204], vec![4.0; 204]];
        let out = concat_views(&parts).unwrap();
        assert_eq!(out.len(), 816);
        assert_eq!(out[204], 2.0);
        let swapped = concat_views(&[parts[1].clone(), parts[0].clone()]).unwrap();
        assert_eq!(swapped[0], 2.0);
        assert_eq!(concat_views(&parts[..1]).unwrap(), parts[0]);
        assert!(concat_views(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
