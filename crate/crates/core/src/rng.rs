//! Seeded substreams for reproducible Monte Carlo.
//!
//! Every random draw in this crate comes from a ChaCha8 stream derived from a
//! user seed and a substream index. ChaCha is counter-based, so substreams are
//! independent and any single replicate can be reproduced in isolation without
//! generating its predecessors.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; used to expand a 64-bit seed into a 256-bit ChaCha key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
///
/// Used to give each scenario in a battery its own seed while the battery
/// itself is driven by one master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut s = seed ^ index.wrapping_mul(0xA24BAED4963EE407);
    splitmix64(&mut s)
}

/// RNG for substream `index` of the stream family keyed by `seed`.
///
/// Identical `(seed, index)` pairs always produce identical streams,
/// regardless of how many other substreams are drawn concurrently.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
