//! Device-to-server links: the analog AWGN channel and the digital
//! quantize/QPSK transceiver.

pub mod analog;
pub mod digital;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analog::{awgn, concat_views};
pub use digital::QuantizerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionMode {
    Analog,
    Digital,
}

impl std::fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransmissionMode::Analog => "analog",
            TransmissionMode::Digital => "digital",
        })
    }
}

impl std::str::FromStr for TransmissionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analog" => Ok(TransmissionMode::Analog),
            "digital" => Ok(TransmissionMode::Digital),
            other => Err(Error::Config(format!("unknown transmission mode '{other}'"))),
        }
    }
}

/// Noise standard deviation for a given SNR, with the signal power measured
/// per real dimension: `sigma^2 = P / 10^(snr/10)`.
pub fn snr_to_sigma(snr_db: f64, signal_power: f64) -> Result<f64> {
    if !(signal_power > 0.0) {
        return Err(Error::OutOfRange(format!("signal power {signal_power} must be > 0")));
    }
    Ok((signal_power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Link conditions for all K devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    snr_db: Vec<f64>,
    per_device_sigma: Vec<f64>,
    mode: TransmissionMode,
    quantizer: Option<QuantizerSpec>,
    /// Skip noise entirely. Only meant for tests and diagnostics.
    #[serde(default)]
    bypass_noise: bool,
}

impl ChannelSpec {
    /// Every device at the same SNR.
    pub fn uniform(
        snr_db: f64,
        k_devices: usize,
        mode: TransmissionMode,
        quantizer: Option<QuantizerSpec>,
    ) -> Result<Self> {
        Self::per_device(vec![snr_db; k_devices], mode, quantizer)
    }

    pub fn per_device(
        snr_db: Vec<f64>,
        mode: TransmissionMode,
        quantizer: Option<QuantizerSpec>,
    ) -> Result<Self> {
        if snr_db.is_empty() {
            return Err(Error::Config("channel needs at least one device".into()));
        }
        if snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        match (mode, &quantizer) {
            (TransmissionMode::Digital, None) => {
                return Err(Error::Config("digital mode requires a quantizer".into()))
            }
            (TransmissionMode::Analog, Some(_)) => {
                return Err(Error::Config("analog mode takes no quantizer".into()))
            }
            (TransmissionMode::Digital, Some(q)) => q.validate()?,
            _ => {}
        }
        let per_device_sigma = snr_db
            .iter()
            .map(|&s| snr_to_sigma(s, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSpec {
            snr_db,
            per_device_sigma,
            mode,
            quantizer,
            bypass_noise: false,
        })
    }

    pub fn with_bypass(mut self, bypass: bool) -> Self {
        self.bypass_noise = bypass;
        self
    }

    pub fn k_devices(&self) -> usize {
        self.snr_db.len()
    }

    pub fn snr_db(&self) -> &[f64] {
        &self.snr_db
    }

    /// Noise standard deviation actually applied on device `k` (zero when
    /// bypassed).
    pub fn sigma(&self, k: usize) -> f64 {
        if self.bypass_noise {
            0.0
        } else {
            self.per_device_sigma[k]
        }
    }

    pub fn per_device_sigma(&self) -> &[f64] {
        &self.per_device_sigma
    }

    pub fn mode(&self) -> TransmissionMode {
        self.mode
    }

    pub fn quantizer(&self) -> Option<&QuantizerSpec> {
        self.quantizer.as_ref()
    }

    pub fn is_bypassed(&self) -> bool {
        self.bypass_noise
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn snr_conversion_examples() {
        assert_relative_eq!(snr_to_sigma(0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let s5 = snr_to_sigma(5.0, 1.0).unwrap();
        assert_relative_eq!(s5 * s5, 0.316_227_766_016_837_94, epsilon = 1e-12);
        assert_relative_eq!(s5, 0.562_341_325_190_349_1, epsilon = 1e-12);
        assert_relative_eq!(snr_to_sigma(-20.0, 1.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(snr_to_sigma(0.0, 4.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(snr_to_sigma(3.0, 0.0).is_err());
    }

    #[test]
    fn quantizer_present_iff_digital() {
        let q = QuantizerSpec::default();
        assert!(ChannelSpec::uniform(5.0, 4, TransmissionMode::Digital, None).is_err());
        assert!(ChannelSpec::uniform(5.0, 4, TransmissionMode::Analog, Some(q.clone())).is_err());
        let spec = ChannelSpec::uniform(5.0, 4, TransmissionMode::Digital, Some(q)).unwrap();
        assert_eq!(spec.k_devices(), 4);
        assert!(spec.per_device_sigma().iter().all(|&s| s > 0.0));
        assert_eq!(spec.clone().with_bypass(true).sigma(2), 0.0);
    }
}
