//! Seeded random streams.
//!
//! Every stochastic operation takes `&mut R where R: Rng`. Campaigns that run
//! flights in parallel derive one independent ChaCha stream per flight from
//! `(master seed, stream id)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Packs a (group, index) pair into a stream id.
pub fn stream_id(group: u32, index: u32) -> u64 {
    (u64::from(group) << 32) | u64::from(index)
}
