//! Seed-stream derivation.
//!
//! Every experiment row carries one root seed; consumers derive named
//! streams from it so that adding a method or re-ordering a pipeline stage
//! never perturbs another stage's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG for `(root, stream)`.
pub fn stream_rng(root: u64, stream: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
