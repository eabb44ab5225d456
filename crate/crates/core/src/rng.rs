//! Deterministic RNG streams for parallel work.
//!
//! Every parallel unit (bootstrap resample, Monte Carlo repetition,
//! MCSIMEX pseudo-dataset) draws from its own ChaCha stream keyed by
//! (seed, stream id), so results do not depend on thread count or
//! scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG for stream `stream_id` of the generator family identified by `seed`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives an independent sub-seed from a seed and a tag (splitmix64 step).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
