//! Stable, platform-independent hashing.
//!
//! Every deterministic decision in the pipeline (record ids, dedup keys,
//! variant splits, mock verdicts, content addressing) flows through SHA-256
//! so that reruns and resumes agree across machines and Rust versions.
//! `std::hash` is deliberately avoided: its output is not stable.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash a list of string fields with an unambiguous separator.
///
/// Fields are length-prefixed so `["ab", "c"]` and `["a", "bc"]` differ.
pub fn sha256_fields(fields: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for field in fields {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Seeded 64-bit hash over string parts, stable across platforms.
///
/// Used for deterministic coin flips (variant splits) and rank ordering
/// (mock judge reject sets).
pub fn seeded_hash64(seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest >= 8 bytes"))
}
