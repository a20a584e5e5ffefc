// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(seed, domain, index)`, so results do not depend on evaluation order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains, kept distinct so e.g. rock 3 and ray 3 never share draws.
pub mod domain {
    pub const ROCKS: u64 = 0x726f_636b;
    pub const FRACTAL: u64 = 0x6672_6163;
    pub const LIDAR: u64 = 0x6c69_6461;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn keyed(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}
