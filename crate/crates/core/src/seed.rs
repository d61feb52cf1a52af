//! Per-stage seed derivation.
//!
//! Every random choice in the pipeline flows from one master seed. Each stage
//! gets its own seed, `derive(master, stage)`, computed as the first eight
//! bytes (little endian) of `SHA-256(master.to_le_bytes() || stage)`. Stages
//! therefore stay reproducible on their own while remaining decoupled from
//! one another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Deterministic generator used by every seeded stage.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
