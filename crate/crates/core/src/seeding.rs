//! Seed derivation.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` whose seed is
//! mixed from the run seed plus structural coordinates (stream id, fold
//! iteration, origin example id). Mixing uses the splitmix64 finalizer, so
//! nearby coordinates yield unrelated streams and a given example receives
//! the same stream regardless of batch composition or thread schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_FOLD: u64 = 0x01;
pub(crate) const STREAM_GENERATE: u64 = 0x02;
pub(crate) const STREAM_EMBED: u64 = 0x03;
pub(crate) const STREAM_SURROGATE: u64 = 0x04;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into one 64-bit seed. Order-sensitive.
pub(crate) fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

pub(crate) fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}
