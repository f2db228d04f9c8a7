//! Named, reproducible random-number streams.
//!
//! Every stochastic component draws from an [`RngStream`] derived from a root
//! seed through a path of labels and indices, e.g.
//! `root.named("table1").named("recoverable").index(17).named("phase1")`.
//! Streams never share state, so replicates can be evaluated in any order or
//! on any number of workers with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: u64,
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl RngStream {
    pub fn root(seed: u64) -> Self {
        Self { key: mix(seed) }
    }

    /// Child stream identified by a label.
    pub fn named(&self, label: &str) -> Self {
        Self {
            key: mix(self.key ^ mix(fnv1a(label))),
        }
    }

    /// Child stream identified by an index (replicate, particle, ...).
    pub fn index(&self, i: u64) -> Self {
        Self {
            key: mix(self.key.rotate_left(17) ^ mix(i.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        ChaCha12Rng::seed_from_u64(self.key)
    }
}
