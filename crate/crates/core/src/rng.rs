//! Deterministic RNG stream derivation.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream whose
//! seed is a mix of the master seed and a tuple of indices, so that parallel
//! tasks never share generator state and results do not depend on the
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep streams for different draws disjoint even when the
/// remaining indices collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    UePlacement = 1,
    LargeScale = 2,
    SmallScale = 3,
    Genetic = 4,
    Auxiliary = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a seed and an index tuple.
pub fn stream_id(seed: u64, tag: StreamTag, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(tag as u64));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Independent generator for `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: StreamTag, indices: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(stream_id(seed, tag, indices))
}
