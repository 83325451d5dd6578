//! Seed derivation for reproducible parallel work.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value. Sub-streams are derived from a master seed and a list of integer
//! coordinates with a SplitMix64 finalizer, so the same coordinates always
//! give the same stream regardless of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of coordinates.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(master.wrapping_add(GOLDEN)), |acc, &c| {
        mix(acc ^ mix(c.wrapping_add(GOLDEN)))
    })
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
