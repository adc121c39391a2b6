//! Seedable randomness.
//!
//! A single named generator backs every stochastic step (weight init, batch
//! shuffling, dropout masks, validation-split selection) so a run seed fully
//! determines a run. ChaCha8 is used because it is seedable from a plain
//! `u64`, portable across platforms, and fast enough that the RNG never
//! matters next to the arithmetic.

use rand::SeedableRng;

/// The generator used everywhere randomness is needed.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds a generator from a bare seed.
pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derives a decorrelated sub-seed for a named stream.
///
/// Weight initialization and batch shuffling must not replay the same draws,
/// so each consumer seeds from `derive(run_seed, stream)` with a distinct
/// stream id. splitmix64 gives well-mixed output even for adjacent inputs.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
