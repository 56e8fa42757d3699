//! Per-agent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for agent `index` of kind `domain`.
pub fn stream(seed: u64, domain: u64, index: u64) -> SimRng {
    let k = splitmix(splitmix(splitmix(seed) ^ domain) ^ index);
    ChaCha8Rng::seed_from_u64(k)
}

/// Stream domains, one per agent kind.
pub mod domain {
    pub const WORLD: u64 = 1;
    pub const PROVIDER: u64 = 2;
    pub const WITNESS: u64 = 3;
    pub const CONSUMER: u64 = 4;
    pub const WORKER: u64 = 5;
    pub const REQUESTER: u64 = 6;
    pub const BROKER: u64 = 7;
    pub const SENSOR: u64 = 8;
    pub const BAND: u64 = 9;
    pub const SETUP: u64 = 10;
}
