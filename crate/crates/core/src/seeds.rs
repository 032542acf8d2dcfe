//! Deterministic derivation of named RNG sub-streams from one root seed.
//!
//! Every randomized stage (scene generation, RANSAC, synthetic attention
//! states, affinity sampling) draws from its own labeled stream so stages
//! can be reordered or skipped without perturbing each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `root` and a stage label.
pub fn derive(root: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// RNG seeded for the sub-stream named `label`.
pub fn rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label))
}
