//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is a
//! master seed folded with a tuple of indices (dataset, λ-index, replicate,
//! ...). Work items therefore own their randomness and results do not depend
//! on how rayon schedules them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams for different purposes apart even when their
/// index tuples coincide.
pub mod tag {
    pub const DATASET: u64 = 0x6461_7461;
    pub const SIMEX: u64 = 0x7369_6d78;
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `keys` into `seed`. Distinct key tuples give unrelated 64-bit values.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// A ChaCha8 generator for the stream identified by `(seed, keys...)`.
pub fn keyed_stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}
