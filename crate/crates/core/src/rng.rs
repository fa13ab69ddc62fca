//! Reproducible random streams.
//!
//! Every random draw in the crate goes through [`RngSeed`], which names a
//! ChaCha8 key (the base seed) and a stream within it. ChaCha is counter
//! based, so a `(base, stream)` pair yields the same sequence on every
//! platform and regardless of which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used throughout the crate.
pub type TvorRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub base: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(base: u64, stream: u64) -> Self {
        Self { base, stream }
    }

    pub fn rng(&self) -> TvorRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.stream);
        rng
    }

    /// A child seed for a labelled sub-task, e.g. `(trial, item)`.
    ///
    /// The child keeps the base key and mixes the parent stream with the
    /// path, so children never depend on evaluation order.
    pub fn derive(&self, path: &[u64]) -> RngSeed {
        let mut h = splitmix64(self.stream ^ 0x5851_f42d_4c95_7f2d);
        for &p in path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        RngSeed {
            base: self.base,
            stream: h,
        }
    }
}

impl From<u64> for RngSeed {
    fn from(base: u64) -> Self {
        RngSeed::new(base, 0)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
