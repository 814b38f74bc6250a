//! The seeded generator shared by every randomized routine.
//!
//! All randomness flows through xoshiro256++ seeded from a single `u64` via
//! SplitMix64 (the reference seeding procedure: the 256-bit state is the
//! first four SplitMix64 outputs for the given seed). The other components
//! that need to agree with this crate (for instance the exporter that picks
//! the saliency-analysis subset) reproduce it with:
//!
//! - `bounded(n)`: `((next_u64() as u128 * n as u128) >> 64) as u64`
//!   (multiply-high, no rejection step).
//! - `shuffled_indices(n, seed)`: start from `0..n`, then for `i` from `n-1`
//!   down to `1` swap positions `i` and `bounded(i + 1)`.
//! - `unit_f64()`: `(next_u64() >> 11) as f64 * 2^-53`.
//! - `derive_seed(seed, index)`: the SplitMix64 output for state
//!   `seed + index * 0x9E3779B97F4A7C15` (wrapping).

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator used throughout the crate.
pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// One SplitMix64 step applied to `state` (returns the mixed output for
/// `state + GOLDEN_GAMMA`).
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for trial / stream `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Integer in `[0, n)`. `n` must be non-zero.
pub fn bounded(rng: &mut SeededRng, n: u64) -> u64 {
    debug_assert!(n > 0);
    ((u128::from(rng.next_u64()) * u128::from(n)) >> 64) as u64
}

/// Uniform double in `[0, 1)` with 53 bits of resolution.
pub fn unit_f64(rng: &mut SeededRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fisher-Yates permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}
