//! Deterministic seed derivation.
//!
//! Every independent unit of randomness (a noise trial, a sweep cell, a
//! Monte Carlo chunk) gets its own ChaCha8 stream seeded by
//! `mix_seed(master, index)`:
//!
//! ```text
//! mix_seed(master, index) = splitmix64(master ^ splitmix64(index + 0x9E3779B97F4A7C15))
//! ```
//!
//! where `splitmix64` is the standard SplitMix64 finalizer. Results depend only
//! on `(master, index)`, never on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(GOLDEN)))
}

/// RNG for stream `index` under `master`.
pub fn stream(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, index))
}
