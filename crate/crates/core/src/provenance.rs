//! Content hashes embedded in output artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 8 bytes (big-endian) of the SHA-256 of the value's compact JSON.
/// Object keys serialize in sorted order, so equal values hash equally.
pub fn stable_hash<T: Serialize + ?Sized>(value: &T) -> u64 {
    let v = serde_json::to_value(value).expect("value serializes to json");
    bytes_hash(&serde_json::to_vec(&v).expect("json value serializes"))
}

/// First 8 bytes (big-endian) of the SHA-256 of `bytes`.
pub fn bytes_hash(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}
