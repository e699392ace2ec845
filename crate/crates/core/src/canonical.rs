//! Canonical JSON bytes and SHA-256 digests.
//!
//! Canonical form: object keys sorted lexicographically, no insignificant
//! whitespace, UTF-8, rationals already normalized to `p/q` by their
//! serializer. Digests are lowercase hex.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Digest of the empty history, used as the genesis link.
pub const ZERO_DIGEST: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub fn canonical_value<T: Serialize + ?Sized>(value: &T) -> Result<Value> {
    Ok(sort_value(serde_json::to_value(value)?))
}

pub fn canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let v = canonical_value(value)?;
    Ok(serde_json::to_vec(&v)?)
}

pub fn canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = canonical_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(sha256_hex(&canonical_bytes(value)?))
}

/// Hash of a JSON object with `digest_field` removed. Sealed artifacts embed
/// their own digest, which is excluded from the hashed payload.
pub fn hash_excluding<T: Serialize + ?Sized>(value: &T, digest_field: &str) -> Result<String> {
    let mut v = canonical_value(value)?;
    if let Value::Object(map) = &mut v {
        map.remove(digest_field);
    }
    Ok(sha256_hex(&serde_json::to_vec(&v)?))
}

fn sort_value(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_value(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_value).collect()),
        other => other,
    }
}
