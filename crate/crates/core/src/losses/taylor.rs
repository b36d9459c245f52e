//! Explicit finite-dimensional feature map for the Gaussian kernel.
//!
//! `K(a, b) = exp(-|a|^2/2s^2) exp(-|b|^2/2s^2) exp(a.b/s^2)`, and expanding
//! the last factor with the multinomial theorem gives coordinates
//! `phi_alpha(x) = exp(-|x|^2/2s^2) x^alpha / (s^|alpha| sqrt(alpha!))`
//! over multi-indices `|alpha| <= order`.

use crate::error::{Error, Result};

fn multi_indices(dim: usize, order: usize) -> Vec<Vec<u32>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for p in 0..=left {
            cur[pos] = p as u32;
            rec(pos + 1, left - p, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    rec(0, order, &mut vec![0; dim], &mut out);
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Truncated feature map; `<phi(a), phi(b)>` approximates the kernel with
/// the exponential series cut after `order` terms.
pub fn taylor_features(x: &[f64], bandwidth: f64, order: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("feature map of an empty vector".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::OutOfRange(format!("bandwidth {bandwidth} must be > 0")));
    }
    let scaled: Vec<f64> = x.iter().map(|v| v / bandwidth).collect();
    let envelope = (-0.5 * scaled.iter().map(|v| v * v).sum::<f64>()).exp();
    Ok(multi_indices(x.len(), order)
        .iter()
        .map(|alpha| {
            let mono: f64 = alpha.iter().zip(&scaled).map(|(&p, &v)| v.powi(p as i32)).product();
            let norm: f64 = alpha.iter().map(|&p| factorial(p)).product();
            envelope * mono / norm.sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::gaussian_kernel;

    #[test]
    fn index_count() {
        // number of monomials of degree <= n in d variables is C(n + d, d)
        assert_eq!(multi_indices(3, 12).len(), 455);
        assert_eq!(multi_indices(1, 4).len(), 5);
    }

    #[test]
    fn inner_product_matches_kernel() {
        let a = [0.3, -0.4, 0.2];
        let b = [-0.1, 0.5, 0.6];
        let fa = taylor_features(&a, 1.0, 12).unwrap();
        let fb = taylor_features(&b, 1.0, 12).unwrap();
        let dot: f64 = fa.iter().zip(&fb).map(|(x, y)| x * y).sum();
        assert!((dot - gaussian_kernel(&a, &b, 1.0).unwrap()).abs() < 1e-9);
    }
}
