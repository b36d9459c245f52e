//! Transferable semantic-feature deployment for multi-device edge inference.
//!
//! Devices extract and compress features from their own view, send them over
//! a noisy analog or digital link, and a server decodes the concatenation.
//! Training runs in two steps: class-weighted MMD domain adaptation under the
//! source channel, then confidence-masked distillation to a new SNR.

pub mod binfmt;
pub mod channel;
pub mod cli;
pub mod datapipe;
pub mod error;
pub mod evalkit;
pub mod losses;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
