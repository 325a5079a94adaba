//! Seed derivation.
//!
//! Every stochastic site (initialization, shuffling, dropout, data generation,
//! kill-check reruns) draws from its own ChaCha stream whose key is derived from
//! a root seed and a path of labels. Streams never share state, so results do not
//! depend on the order in which independent jobs execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// A node in a deterministic tree of seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree(u64);

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree(seed)
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    /// Derives a named child stream.
    pub fn child(self, label: &str) -> Self {
        SeedTree(splitmix64(self.0 ^ splitmix64(fnv1a(label.as_bytes()))))
    }

    /// Derives an indexed child stream.
    pub fn index(self, i: u64) -> Self {
        SeedTree(splitmix64(self.0.wrapping_add(splitmix64(i ^ 0xA076_1D64_78BD_642F))))
    }

    pub fn rng(self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
