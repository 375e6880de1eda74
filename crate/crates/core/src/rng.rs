//! Seeding and random streams.
//!
//! Every trial owns a ChaCha8 stream seeded from a 64-bit value derived by
//! [`mix_seed`]. The mixer is the SplitMix64 finalizer applied in a fixed
//! chain, so seeds are portable across machines and independent of worker
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of trial `trial_index` at grid point `grid_index`.
///
/// `seed = sm(sm(sm(base) ^ grid) ^ trial)` with `sm` the SplitMix64 step.
pub fn mix_seed(base: u64, grid_index: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ grid_index) ^ trial_index)
}

/// Open the stream for an already-mixed seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
