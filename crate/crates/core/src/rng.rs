//! Seed plumbing for reproducible simulations.
//!
//! Every random draw in the crate comes from a [`SimRng`] derived from one
//! 64-bit seed. Replication `i` of a stream is seeded with `seed ^ i` and the
//! stream id selects an independent ChaCha stream, so work units can run in
//! any order or on any thread without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSequence {
    seed: u64,
}

impl SeedSequence {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for replication `index` within `stream`.
    pub fn replication(&self, stream: u64, index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ index);
        rng.set_stream(stream);
        rng
    }

    pub fn stream(&self, stream: u64) -> SimRng {
        self.replication(stream, 0)
    }
}

/// Stable stream id for a labelled sub-experiment (e.g. `("estimation", n)`).
pub fn stream_id(label: &str, n: usize) -> u64 {
    let mut h = fnv1a(label.as_bytes(), FNV_OFFSET);
    h = fnv1a(&(n as u64).to_le_bytes(), h);
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub(crate) fn fnv_start() -> u64 {
    FNV_OFFSET
}
