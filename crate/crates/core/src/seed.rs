//! Seed derivation for reproducible sub-streams.
//!
//! Every worker-level RNG derives its own seed from the run seed plus a
//! context label, so evaluation order and parallelism cannot affect output.

use sha2::{Digest, Sha256};

/// Derives a 64-bit sub-seed from a parent seed and context parts.
/// SHA-256 over `parent_le || 0x1f-joined parts`, first 8 bytes little-endian.
pub fn derive_seed(parent: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    for part in parts {
        hasher.update([0x1f]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}
