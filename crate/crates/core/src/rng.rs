//! Counter-based stream derivation.
//!
//! Every random stream is keyed by the master seed and a tuple of counters
//! (domain tag, island or replication index, step). The key is hashed with
//! SplitMix64 into a ChaCha8 seed, so the values drawn by a given island at a
//! given step never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags separating the purposes streams are used for.
pub mod domain {
    pub const INIT: u64 = 0x1;
    pub const WITHIN: u64 = 0x2;
    pub const ACROSS: u64 = 0x3;
    pub const REPLICATION: u64 = 0x4;
    pub const DATA: u64 = 0x5;
    pub const REFERENCE: u64 = 0x6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a list of counters into a single 64-bit key.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &c in counters {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// A fresh generator for the stream identified by `(master, counters)`.
pub fn stream(master: u64, counters: &[u64]) -> StreamRng {
    let key = derive_seed(master, counters);
    let mut seed = [0u8; 32];
    let mut x = key;
    for chunk in seed.chunks_exact_mut(8) {
        x = splitmix64(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    StreamRng::from_seed(seed)
}
