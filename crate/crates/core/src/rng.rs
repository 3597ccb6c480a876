//! Counter-derived seeding; every random stream in the crate comes from here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for stream `(tag, index)` under a base seed.
#[inline]
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}

pub mod tags {
    pub const QUADRATURE: u64 = 1;
    pub const CASCADE: u64 = 2;
    pub const RESTART: u64 = 3;
    pub const DISORDER: u64 = 4;
    pub const METROPOLIS: u64 = 5;
    pub const VALIDATE: u64 = 6;
    pub const XI_STAR: u64 = 7;
    pub const COVARIANCE: u64 = 8;
}
