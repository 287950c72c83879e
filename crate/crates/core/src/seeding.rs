//! Deterministic per-item random streams.
//!
//! Every parallel work item draws from its own generator keyed by
//! `(master_seed, stream, index)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CvRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of keys into a 64-bit seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng_for(master: u64, keys: &[u64]) -> CvRng {
    CvRng::seed_from_u64(derive_seed(master, keys))
}

pub fn rng_from_seed(seed: u64) -> CvRng {
    CvRng::seed_from_u64(seed)
}
