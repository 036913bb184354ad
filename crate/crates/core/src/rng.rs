//! Seed splitting.
//!
//! Every random stream is derived from one master seed and a
//! `(purpose, index)` pair: the master seed keys a ChaCha8 generator and the
//! pair selects its stream. Purposes are short path-like strings such as
//! `"gen/points"` or `"rcn/samples"`; the index enumerates replications or
//! examples. The same triple always yields the same stream regardless of
//! how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream_id(purpose: &str, index: u64) -> u64 {
    fnv1a(purpose.as_bytes()) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn derive_rng(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, index));
    rng
}

/// A child seed, for APIs that take a `u64` rather than a generator.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    use rand::RngCore;
    derive_rng(seed, purpose, index).next_u64()
}
