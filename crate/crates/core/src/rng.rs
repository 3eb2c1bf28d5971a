//! Labelled random substreams.
//!
//! Every run is driven by a single `u64` seed. Components derive their own
//! generators from `(seed, label, index)` paths, so the numbers a datum or a
//! chain sees never depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to every sampling routine.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A node in the tree of random substreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Streams {
    key: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed ^ 0x5EED_0F_E8B1_u64),
        }
    }

    /// Substream identified by a label.
    pub fn child(&self, label: &str) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(fnv1a(label))),
        }
    }

    /// Substream identified by an integer counter.
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: splitmix64(self.key.wrapping_add(splitmix64(i.wrapping_add(1)))),
        }
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key)
    }

    /// A fresh seed derived from this node, for APIs that take a raw seed.
    pub fn seed(&self) -> u64 {
        self.key
    }
}
