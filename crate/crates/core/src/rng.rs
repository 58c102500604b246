//! Deterministic child-stream derivation.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream whose seed
//! is a mix of the master seed and a path of integer keys (stage, class,
//! replica, ...). Streams therefore do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0xA076_1D64_78BD_642F)))
    })
}

pub fn stream(master: u64, keys: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, keys))
}

/// Uniform in [0, 1) from a hashed key path; used for coupled sampling.
pub fn hashed_uniform(master: u64, keys: &[u64]) -> f64 {
    (derive_seed(master, keys) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
