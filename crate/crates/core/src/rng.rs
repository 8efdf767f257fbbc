//! Deterministic RNG stream derivation.
//!
//! Every stochastic step in the crate draws from a ChaCha stream derived from
//! a user seed and a purpose identifier. Streams with distinct identifiers
//! are independent, so inserting or removing draws in one part of a pipeline
//! never shifts the randomness seen by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for `(seed, stream id)`. Same pair, same sequence of draws.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Mixes a seed with a purpose id into a fresh seed (splitmix64 finalizer),
/// for APIs that take a plain seed rather than an RNG.
pub fn derive(seed: u64, id: u64) -> u64 {
    let mut z = seed ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
