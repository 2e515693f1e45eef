//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The domain separates independent uses of one user
//! seed (data vs. multipliers, ..); the index is the ChaCha stream id, so
//! replicate `m` of a batch always sees the same numbers regardless of how
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains.
pub mod domain {
    pub const DATA: u64 = 0x6461_7461;
    pub const MULTIPLIERS: u64 = 0x6d75_6c74;
    pub const EXPERIMENT: u64 = 0x6578_7065;
    pub const ORACLE: u64 = 0x6f72_6163;
}

/// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. the seed of the `i`-th Monte Carlo repetition.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(domain)) ^ index)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain)));
    rng.set_stream(index);
    rng
}
