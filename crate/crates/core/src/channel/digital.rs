//! Digital transceiver: uniform ADC, natural binary coding, Gray-mapped
//! QPSK over a complex AWGN channel, hard demodulation and DAC.
//!
//! Training cannot differentiate through `round`, so the training path
//! replaces it with the recursive sine surrogate [`soft_round`], skips the
//! modem and adds real Gaussian noise of the same total power directly to
//! the (soft) quantization index.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSpec {
    /// Bits per feature entry.
    pub q_b: u32,
    pub z_min: f64,
    pub z_max: f64,
    /// Recursion depth of the rounding surrogate.
    pub r: u32,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        QuantizerSpec {
            q_b: 2,
            z_min: -1.0,
            z_max: 1.0,
            r: 3,
        }
    }
}

impl QuantizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q_b == 0 || self.q_b > 16 {
            return Err(Error::Config(format!("q_b = {} must be in 1..=16", self.q_b)));
        }
        if !(self.z_min < self.z_max) {
            return Err(Error::Config(format!(
                "quantizer bounds [{}, {}] are empty",
                self.z_min, self.z_max
            )));
        }
        if self.r == 0 {
            return Err(Error::Config("surrogate depth r must be >= 1".into()));
        }
        Ok(())
    }

    /// Highest index, `2^q_b - 1`.
    pub fn max_index(&self) -> u32 {
        (1u32 << self.q_b) - 1
    }

    /// Quantizer step `(z_max - z_min) / (2^q_b - 1)`.
    pub fn step(&self) -> f64 {
        (self.z_max - self.z_min) / f64::from(self.max_index())
    }
}

/// Affine map of `[z_min, z_max]` onto `[0, 2^q_b - 1]`.
///
/// Values exactly on the bounds are accepted; the bounded encoder output can
/// saturate to them in floating point.
pub fn g_map(z: &[f64], spec: &QuantizerSpec) -> Result<Vec<f64>> {
    let scale = f64::from(spec.max_index()) / (spec.z_max - spec.z_min);
    z.iter()
        .map(|&v| {
            if !(v >= spec.z_min && v <= spec.z_max) {
                return Err(Error::OutOfRange(format!(
                    "{v} outside quantizer range [{}, {}]",
                    spec.z_min, spec.z_max
                )));
            }
            Ok((v - spec.z_min) * scale)
        })
        .collect()
}

/// `round(g(z))`, ties away from zero.
pub fn quantize_index(z: &[f64], spec: &QuantizerSpec) -> Result<Vec<u32>> {
    let max = spec.max_index();
    Ok(g_map(z, spec)?
        .into_iter()
        .map(|x| (x.round() as u32).min(max))
        .collect())
}

/// MSB-first fixed-width natural binary code.
pub fn encode_bits(indices: &[u32], q_b: u32) -> Result<Vec<u8>> {
    let limit = 1u64 << q_b;
    let mut bits = Vec::with_capacity(indices.len() * q_b as usize);
    for &idx in indices {
        if u64::from(idx) >= limit {
            return Err(Error::OutOfRange(format!("index {idx} does not fit in {q_b} bits")));
        }
        for shift in (0..q_b).rev() {
            bits.push(((idx >> shift) & 1) as u8);
        }
    }
    Ok(bits)
}

pub fn decode_bits(bits: &[u8], q_b: u32) -> Result<Vec<u32>> {
    if q_b == 0 || bits.len() % q_b as usize != 0 {
        return Err(Error::MalformedLength(format!(
            "{} bits is not a multiple of q_b = {q_b}",
            bits.len()
        )));
    }
    bits.chunks(q_b as usize)
        .map(|chunk| {
            chunk.iter().try_fold(0u32, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | u32::from(b)),
                _ => Err(Error::OutOfRange(format!("bit value {b}"))),
            })
        })
        .collect()
}

/// Gray-mapped unit-energy QPSK. The first bit of each pair selects the
/// sign of the in-phase part, the second the quadrature part (0 -> +, 1 -> -):
/// `00 -> (1+j)/√2, 01 -> (1-j)/√2, 11 -> (-1-j)/√2, 10 -> (-1+j)/√2`.
pub fn modulate_qpsk(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::MalformedLength(format!("odd bit count {}", bits.len())));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let level = |b: u8| if b == 0 { a } else { -a };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex64::new(level(p[0]), level(p[1])))
        .collect())
}

/// Nearest-constellation-point decision, i.e. a sign test per component.
pub fn demodulate_qpsk(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// Circularly-symmetric complex Gaussian noise of total power `sigma^2` per
/// symbol. `sigma == 0` bypasses.
pub fn complex_awgn<R: Rng + ?Sized>(
    symbols: &[Complex64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(sigma >= 0.0) {
        return Err(Error::OutOfRange(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(symbols.to_vec());
    }
    let per_component = sigma * std::f64::consts::FRAC_1_SQRT_2;
    Ok(symbols
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            s + Complex64::new(per_component * re, per_component * im)
        })
        .collect())
}

/// Inverse of [`g_map`]: `z_min + x * step`.
pub fn dac(x: &[f64], spec: &QuantizerSpec) -> Vec<f64> {
    let step = spec.step();
    x.iter().map(|&v| spec.z_min + v * step).collect()
}

fn soft_round_once(x: f64) -> f64 {
    x - (std::f64::consts::TAU * x).sin() / std::f64::consts::TAU
}

/// Recursive sine rounding surrogate: `R(x,1) = x - sin(2πx)/(2π)`,
/// `R(x,r) = R(R(x,r-1),1)`. Integers are exact fixed points.
pub fn soft_round(x: f64, r: u32) -> f64 {
    (0..r.max(1)).fold(x, |acc, _| soft_round_once(acc))
}

/// `(R(x,r), dR/dx)`.
pub fn soft_round_with_grad(x: f64, r: u32) -> (f64, f64) {
    let mut value = x;
    let mut grad = 1.0;
    for _ in 0..r.max(1) {
        grad *= 1.0 - (std::f64::consts::TAU * value).cos();
        value = soft_round_once(value);
    }
    (value, grad)
}

/// Differentiable training path for one device:
/// `dac(R(g(z), r) + sigma * n)` with `n` standard normal. The noise draws are
/// passed in so that forward and backward passes see the same realisation.
///
/// Returns the received features and `d out / d z` per entry.
pub fn digital_train_forward(
    z: &[f64],
    spec: &QuantizerSpec,
    sigma: f64,
    std_noise: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if std_noise.len() != z.len() {
        return Err(Error::Dimension("noise draw length differs from feature length".into()));
    }
    let g = g_map(z, spec)?;
    // d dac/dx * d g/dz = step * (L / range) = 1
    let mut out = Vec::with_capacity(z.len());
    let mut grad = Vec::with_capacity(z.len());
    for (x, n) in g.iter().zip(std_noise) {
        let (soft, d) = soft_round_with_grad(*x, spec.r);
        out.push(soft + sigma * n);
        grad.push(d);
    }
    Ok((dac(&out, spec), grad))
}

/// Everything the inference chain produced for one device vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFrame {
    pub indices: Vec<u32>,
    /// Natural binary code, MSB first; one zero pad bit is appended when
    /// `a_out * q_b` is odd.
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub received_bits: Vec<u8>,
    pub received_indices: Vec<u32>,
    pub reconstruction: Vec<f64>,
}

/// Full inference chain: quantize → bits → QPSK → complex AWGN → hard
/// demodulation → bits → DAC.
pub fn digital_infer_frame<R: Rng + ?Sized>(
    z: &[f64],
    spec: &QuantizerSpec,
    sigma: f64,
    rng: &mut R,
) -> Result<DigitalFrame> {
    let indices = quantize_index(z, spec)?;
    let mut bits = encode_bits(&indices, spec.q_b)?;
    let payload = bits.len();
    if payload % 2 == 1 {
        bits.push(0);
    }
    let symbols = modulate_qpsk(&bits)?;
    let received = complex_awgn(&symbols, sigma, rng)?;
    let mut received_bits = demodulate_qpsk(&received);
    received_bits.truncate(payload);
    let received_indices = decode_bits(&received_bits, spec.q_b)?;
    let as_real: Vec<f64> = received_indices.iter().map(|&i| f64::from(i)).collect();
    let reconstruction = dac(&as_real, spec);
    Ok(DigitalFrame {
        indices,
        bits,
        symbols,
        received,
        received_bits,
        received_indices,
        reconstruction,
    })
}

pub fn digital_infer_forward<R: Rng + ?Sized>(
    z: &[f64],
    spec: &QuantizerSpec,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(digital_infer_frame(z, spec, sigma, rng)?.reconstruction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use approx::assert_relative_eq;

    fn q(q_b: u32) -> QuantizerSpec {
        QuantizerSpec {
            q_b,
            ..QuantizerSpec::default()
        }
    }

    #[test]
    fn g_map_examples() {
        let s = q(2);
        let g = g_map(&[-1.0 + 1e-12, 0.0, 1.0 - 1e-12], &s).unwrap();
        assert!(g[0].abs() < 1e-9 && g[0] > 0.0);
        assert_eq!(g[1], 1.5);
        assert!((g[2] - 3.0).abs() < 1e-9 && g[2] < 3.0);
        let g1 = g_map(&[0.3], &q(1)).unwrap();
        assert_relative_eq!(g1[0], (0.3 + 1.0) / 2.0, epsilon = 1e-15);
        assert!(g_map(&[1.5], &s).is_err());
        assert!(g_map(&[f64::NAN], &s).is_err());
    }

    #[test]
    fn quantize_index_examples() {
        let s = q(2);
        assert_eq!(quantize_index(&[0.0], &s).unwrap(), vec![2]);
        assert_eq!(quantize_index(&[0.9], &s).unwrap(), vec![3]);
        assert_eq!(quantize_index(&[-0.999], &s).unwrap(), vec![0]);
    }

    #[test]
    fn bit_codec_examples_and_exhaustive() {
        assert_eq!(encode_bits(&[3, 0, 2], 2).unwrap(), vec![1, 1, 0, 0, 1, 0]);
        assert_eq!(encode_bits(&[9], 4).unwrap(), vec![1, 0, 0, 1]);
        for q_b in 1..=8 {
            let all: Vec<u32> = (0..1u32 << q_b).collect();
            let bits = encode_bits(&all, q_b).unwrap();
            assert_eq!(decode_bits(&bits, q_b).unwrap(), all);
        }
        assert!(encode_bits(&[4], 2).is_err());
        assert!(matches!(decode_bits(&[1, 0, 1], 2), Err(Error::MalformedLength(_))));
    }

    #[test]
    fn qpsk_table_and_round_trip() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let sym = modulate_qpsk(&[0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        assert_eq!(sym[0], Complex64::new(a, a));
        assert_eq!(sym[1], Complex64::new(a, -a));
        assert_eq!(sym[2], Complex64::new(-a, -a));
        assert_eq!(sym[3], Complex64::new(-a, a));
        for s in &sym {
            assert_relative_eq!(s.norm_sqr(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(demodulate_qpsk(&sym), vec![0, 0, 0, 1, 1, 1, 1, 0]);
        assert!(modulate_qpsk(&[1, 0, 1]).is_err());
    }

    #[test]
    fn dac_examples() {
        let s = q(2);
        assert_relative_eq!(dac(&[2.0], &s)[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(dac(&[0.0], &s)[0], -1.0);
        assert_eq!(dac(&[3.0], &s)[0], 1.0);
        let z = [-0.7, 0.1, 0.55];
        let back = dac(&g_map(&z, &s).unwrap(), &s);
        for (a, b) in z.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn soft_round_examples() {
        for k in -3..=5 {
            for r in 1..=4 {
                assert_eq!(soft_round(f64::from(k), r), f64::from(k));
            }
        }
        assert_relative_eq!(soft_round(0.25, 1), 0.25 - 1.0 / std::f64::consts::TAU, epsilon = 1e-15);
        assert_relative_eq!(soft_round(0.25, 1), 0.090_845_056_908_206_2, epsilon = 1e-12);
    }

    #[test]
    fn soft_round_gradient_matches_differences() {
        let h = 1e-6;
        for &x in &[0.1, 0.37, 1.8, -0.6, 2.49] {
            let (_, d) = soft_round_with_grad(x, 3);
            let fd = (soft_round(x + h, 3) - soft_round(x - h, 3)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6 * d.abs().max(1.0), "x={x}: {d} vs {fd}");
        }
    }

    #[test]
    fn soft_round_is_monotone_within_cells() {
        for k in 0..3 {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let x = f64::from(k) - 0.49 + 0.98 * f64::from(i) / 1000.0;
                let y = soft_round(x, 3);
                // R' = prod(1 - cos) >= 0; allow last-bit rounding on the flat parts
                assert!(y >= prev - 1e-15);
                prev = y;
            }
        }
    }

    #[test]
    fn noiseless_train_path_on_levels_is_identity() {
        let s = q(2);
        let z = dac(&[0.0, 1.0, 2.0, 3.0], &s);
        let (out, _) = digital_train_forward(&z, &s, 0.0, &[0.0; 4]).unwrap();
        for (a, b) in z.iter().zip(&out) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn train_path_gradient_matches_differences() {
        let s = q(2);
        // keep g(z) away from integers, where R' vanishes and differences lose precision
        let z = [-0.7, -0.05, 0.62, 0.71];
        let noise = [0.3, -1.1, 0.05, 0.7];
        let (_, grad) = digital_train_forward(&z, &s, 0.4, &noise).unwrap();
        let h = 1e-6;
        for i in 0..z.len() {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fp = digital_train_forward(&zp, &s, 0.4, &noise).unwrap().0[i];
            let fm = digital_train_forward(&zm, &s, 0.4, &noise).unwrap().0[i];
            let fd = (fp - fm) / (2.0 * h);
            assert!(grad[i].is_finite() && grad[i] != 0.0);
            assert!((grad[i] - fd).abs() <= 1e-4 * grad[i].abs().max(fd.abs()), "{i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn noiseless_chain_is_within_half_step() {
        let s = q(2);
        let mut rng = substream(0, Stream::Eval);
        let z: Vec<f64> = (0..=400).map(|i| -1.0 + 2.0 * f64::from(i) / 400.0).collect();
        let out = digital_infer_forward(&z, &s, 0.0, &mut rng).unwrap();
        for (a, b) in z.iter().zip(&out) {
            assert!((a - b).abs() <= s.step() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn odd_payload_is_padded() {
        let s = q(3);
        let mut rng = substream(0, Stream::Eval);
        let frame = digital_infer_frame(&[0.1], &s, 0.0, &mut rng).unwrap();
        assert_eq!(frame.bits.len(), 4);
        assert_eq!(frame.symbols.len(), 2);
        assert_eq!(frame.received_bits.len(), 3);
        assert_eq!(frame.received_indices, frame.indices);
    }

    #[test]
    fn complex_noise_power() {
        let n = 100_000;
        let sigma = 0.6;
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let noisy = complex_awgn(&zero, sigma, &mut substream(2, Stream::Eval)).unwrap();
        let power = noisy.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        assert!((power / (sigma * sigma) - 1.0).abs() < 0.02);
        assert_eq!(complex_awgn(&zero[..3], 0.0, &mut substream(2, Stream::Eval)).unwrap(), zero[..3]);
    }

    #[test]
    fn high_snr_chain_matches_noiseless() {
        let s = q(2);
        let sigma = crate::channel::snr_to_sigma(30.0, 1.0).unwrap();
        let z: Vec<f64> = (0..5000).map(|i| -0.99 + 1.98 * f64::from(i) / 5000.0).collect();
        let clean = digital_infer_forward(&z, &s, 0.0, &mut substream(1, Stream::Eval)).unwrap();
        let noisy = digital_infer_forward(&z, &s, sigma, &mut substream(1, Stream::Eval)).unwrap();
        let agree = clean.iter().zip(&noisy).filter(|(a, b)| a == b).count();
        assert!(agree as f64 / z.len() as f64 > 0.999);
    }
}
