//! Seeded FNV-1a, used wherever a stable feature hash is needed.
//!
//! `std`'s `DefaultHasher` is not guaranteed stable across releases, and model
//! files persist bucket indices, so the hash is pinned here.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hash seed shipped with every default provider and feature extractor.
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_2024;

pub fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashes a namespaced list of parts, separated by a unit separator so that
/// `["ab", "c"]` and `["a", "bc"]` land in different buckets.
pub fn bucket(seed: u64, namespace: &str, parts: &[&str], modulus: usize) -> usize {
    let mut buf = Vec::with_capacity(32);
    buf.extend_from_slice(namespace.as_bytes());
    for p in parts {
        buf.push(0x1f);
        buf.extend_from_slice(p.as_bytes());
    }
    (fnv1a(seed, &buf) % modulus as u64) as usize
}
