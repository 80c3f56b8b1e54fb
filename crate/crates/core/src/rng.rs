//! Counter-based seeding.
//!
//! Every random stream in the crate is keyed by a tuple of integers (a master
//! seed plus sample, cell or run indices). Mixing the key into a fresh
//! ChaCha stream makes results independent of iteration order and of the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a key sequence into one 64-bit seed.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// A generator for the stream identified by `(seed, key...)`.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}

/// Stable 64-bit hash of a string (FNV-1a), used to turn labels into keys.
pub fn str_key(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
