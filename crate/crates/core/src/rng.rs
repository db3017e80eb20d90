//! Labeled sub-seed derivation.
//!
//! Every random stream is keyed by `(root seed, label parts)` so that adding a
//! new consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for label in labels {
        // Length prefix keeps ["ab", "c"] and ["a", "bc"] apart.
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}
