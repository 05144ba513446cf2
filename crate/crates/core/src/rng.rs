//! Per-sample keyed random streams.
//!
//! Randomness that depends on a sample is drawn from a generator seeded by
//! mixing the run seed with a hash of the sample id, so results do not depend
//! on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a over the bytes of `s`.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, key)`. `salt` separates independent uses of the same key.
pub fn keyed_rng(seed: u64, key: &str, salt: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(fnv1a(key) ^ splitmix64(salt)));
    ChaCha8Rng::seed_from_u64(mixed)
}
