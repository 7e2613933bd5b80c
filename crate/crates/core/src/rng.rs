//! Seeding helpers. Every replicate gets its own stream derived from a master
//! seed, so results do not depend on how replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ mix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Seed for a named sub-stream (e.g. one per experiment component).
pub fn stream_seed(master: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(mix64(master), |acc, b| mix64(acc ^ u64::from(b)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_rng(master: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(master, index))
}
