//! Seed derivation helpers.
//!
//! Every random object in the crate is a pure function of an explicit `u64`
//! seed. Independent streams (per resample attempt, per Monte Carlo run, per
//! loss draw) are obtained by hashing the parent seed with a counter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `index`-th child seed of `seed`.
#[inline]
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_F42D_4C95_7F2D))
}

/// Hashes a tuple of counters into a uniform double in `[0, 1)`.
#[inline]
pub fn counter_uniform(seed: u64, counters: &[u64]) -> f64 {
    let mut h = mix64(seed);
    for &c in counters {
        h = mix64(h ^ c);
    }
    // top 53 bits
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
