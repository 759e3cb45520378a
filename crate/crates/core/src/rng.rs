//! Seeding contract.
//!
//! A single root seed fans out into independent streams. Every sampled
//! object draws from `SeedStream::rng(task)`, where `task` is the index of
//! the object inside its experiment (sample number, replica number, ...).
//! The generator is ChaCha8, which is counter based: the stream id selects
//! an independent keystream, so the bits a task sees never depend on which
//! thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Root of a family of reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { key: root }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Derives an independent sub-family, e.g. one per grid point of a sweep.
    pub fn child(&self, tag: u64) -> SeedStream {
        SeedStream {
            key: splitmix64(self.key ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Generator for task number `task`.
    pub fn rng(&self, task: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(task);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
