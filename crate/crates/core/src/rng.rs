//! Seeded, stream-split randomness.
//!
//! Every consumer derives its own ChaCha stream from `(seed, stream id)`, so
//! results never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream identifiers for the pipeline consumers.
pub mod streams {
    pub const MASK: u64 = 1;
    pub const FOREST: u64 = 2;
    pub const HIREF: u64 = 3;
    pub const EMBED: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const BATCHES: u64 = 6;
    pub const SUBSAMPLE: u64 = 7;
    pub const METRICS: u64 = 8;
    pub const SYNTHETIC: u64 = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngConfig {
    pub seed: u64,
}

impl RngConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Generator for one consumer.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Generator for item `index` of a consumer (one tree, one recursion node, ...).
    pub fn substream(&self, stream: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, index));
        rng.set_stream(stream);
        rng
    }

    /// A child configuration, e.g. one per domain.
    pub fn derive(&self, salt: u64) -> RngConfig {
        RngConfig {
            seed: mix(self.seed, salt ^ 0xA076_1D64_78BD_642F),
        }
    }
}

/// SplitMix64 finalizer over the pair.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
