//! Deterministic random streams.
//!
//! A master seed and an experiment tag are hashed into a ChaCha key; each
//! replica (or block, or l-value) gets its own ChaCha stream id under that key.
//! Every consumer derives its stream from `(seed, tag, index)` alone, so the
//! order in which parallel workers run cannot change any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// Key from which independent, reproducible streams are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub tag: String,
}

impl StreamKey {
    pub fn new(seed: u64, tag: impl Into<String>) -> Self {
        Self { seed, tag: tag.into() }
    }

    /// Child key for a sub-experiment, e.g. one point of a sweep.
    pub fn child(&self, label: impl std::fmt::Display) -> Self {
        Self { seed: self.seed, tag: format!("{}/{}", self.tag, label) }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"sdelab-stream-v1");
        h.update(self.seed.to_le_bytes());
        h.update((self.tag.len() as u64).to_le_bytes());
        h.update(self.tag.as_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    /// Stream number `index` under this key.
    pub fn stream(&self, index: u64) -> StreamRng {
        let mut rng = StreamRng::from_seed(self.key_bytes());
        rng.set_stream(index);
        rng
    }
}
