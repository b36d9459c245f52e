//! Named random substreams derived from a single experiment seed.
//!
//! Every consumer of randomness (data shuffling, parameter init, channel
//! noise per device, synthetic data generation) gets its own ChaCha stream so
//! that changing how one of them is consumed never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers. Device noise streams start at `CHANNEL_BASE` and are
/// offset by the device index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Synth,
    Eval,
    Channel { phase: u32, device: u32 },
}

const CHANNEL_BASE: u64 = 1 << 32;

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::Synth => 3,
            Stream::Eval => 4,
            Stream::Channel { phase, device } => {
                CHANNEL_BASE + (u64::from(phase) << 16) + u64::from(device)
            }
        }
    }
}

/// Creates the generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Mixes a seed with an arbitrary tag (splitmix64 finaliser). Used to derive
/// per-run seeds such as `seed + draw index` without correlated streams.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
