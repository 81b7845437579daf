//! Seed derivation. Every consumer of randomness gets its own ChaCha stream
//! keyed by `(user seed, purpose, index)`, so streams never interfere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    DatasetMeans = 1,
    DatasetSamples = 2,
    Partition = 3,
    ModelInit = 4,
    AuxInit = 5,
    ClientStream = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ purpose as u64) ^ index)
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, purpose, index))
}
