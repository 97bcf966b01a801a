//! Counter-based seed derivation.
//!
//! Experiments derive one independent ChaCha stream per work unit from a
//! master seed and a list of labels (stream kind, replica, t-index, ...).
//! Any single unit is reproducible in isolation, and results do not depend
//! on which worker thread executed it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream kinds used by the experiment runners.
pub mod stream {
    pub const BASE_DRAW: u64 = 1;
    pub const EVOLVE: u64 = 2;
    pub const OUTER_DRAW: u64 = 3;
    pub const INNER_DRAW: u64 = 4;
    pub const INSTANCE: u64 = 5;
    pub const PATH: u64 = 6;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a label path (SplitMix-style
/// finalizer per label).
pub fn derive(master: u64, labels: &[u64]) -> u64 {
    let mut state = mix(master.wrapping_add(GOLDEN));
    for &label in labels {
        state = mix(state ^ label.wrapping_mul(GOLDEN).wrapping_add(1));
    }
    state
}

/// A fresh deterministic generator for one work unit.
pub fn stream_rng(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, labels))
}
