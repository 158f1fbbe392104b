//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] derived from a single
//! global seed and a path of integer keys (experiment, point, realization, ...).
//! Two derivations with the same seed and path produce the same stream no matter
//! which thread performs them, which is what makes parallel runs reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hierarchical key: hashes `seed` followed by each element of `path`.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(seed), |acc, &k| mix(acc ^ mix(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Stream keyed by `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> Stream {
    let key = derive_key(seed, path);
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&mix(key ^ (i as u64).wrapping_mul(0xA076_1D64_78BD_642F)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Labels for the top level of the stream hierarchy.
pub mod tag {
    pub const REALIZATION: u64 = 1;
    pub const TRUTH: u64 = 2;
    pub const SO_INNER: u64 = 3;
    pub const QTABLE: u64 = 4;
    pub const NETSIM: u64 = 5;
    pub const ORACLE: u64 = 6;
    pub const FADING: u64 = 7;
    pub const TUNE: u64 = 8;
}
