//! Deterministic random streams.
//!
//! Every random quantity in a run is drawn from a stream keyed by
//! `(seed, domain, index)`, so a round's decision set or noise never depends
//! on how many draws earlier rounds consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Distinct domains never share a stream.
pub mod domain {
    pub const DECISION_SET: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const TIE_BREAK: u64 = 3;
    pub const TRANSITION: u64 = 4;
    pub const INSTANCE: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let key = splitmix64(seed ^ splitmix64(domain ^ splitmix64(index)));
    ChaCha8Rng::seed_from_u64(key)
}
