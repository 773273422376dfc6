//! Seeded randomness shared by every stochastic component.
//!
//! All randomness flows through [`rng`] so a run is a pure function of its
//! seeds. ChaCha8 is used because its output stream is stable across
//! platforms and crate versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from a master seed and a list of coordinates.
///
/// The derivation only looks at the coordinates it is given, so adding or
/// removing unrelated grid entries never perturbs an existing cell.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
