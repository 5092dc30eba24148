//! Deterministic, addressable random streams.
//!
//! A [`RandomStream`] is a `(seed, path)` pair. The path names a task, for
//! example `[disorder_index]` or `[cascade_index, node_index]`, and the
//! generator for a stream is keyed by a hash of the whole pair. Two tasks
//! therefore never share a generator, and a task's output does not depend on
//! which worker ran it or in what order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Generator type handed out by [`RandomStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    seed: u64,
    path: Vec<u64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: Vec::new() }
    }

    pub fn with_path(seed: u64, path: &[u64]) -> Self {
        Self { seed, path: path.to_vec() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Stream for sub-task `index` of this task.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self { seed: self.seed, path }
    }

    /// Stream for a labelled sub-task; `label` separates unrelated uses of the
    /// same index space (couplings vs. perturbation couplings, say).
    pub fn fork(&self, label: &str) -> Self {
        self.child(label_hash(label))
    }

    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(b"sglab-stream-v1");
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.path.len() as u64).to_le_bytes());
        for p in &self.path {
            hasher.update(p.to_le_bytes());
        }
        let key: [u8; 32] = hasher.finalize().into();
        ChaCha8Rng::from_seed(key)
    }
}

fn label_hash(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    // keep labels out of the small-integer range used for plain indices
    u64::from_le_bytes(bytes) | (1 << 63)
}
