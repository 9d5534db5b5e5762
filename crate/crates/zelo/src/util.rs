//! Deterministic seed derivation. Stable across platforms and releases so
//! that serialized outputs stay byte-identical for a fixed seed.

/// FNV-1a over bytes. Used to fold string ids into seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 finalizer. Decorrelates derived seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a role tag.
pub fn derive_seed(parent: u64, role: u64) -> u64 {
    mix64(parent ^ mix64(role))
}

/// Derives a child seed keyed by a string id.
pub fn derive_seed_str(parent: u64, id: &str) -> u64 {
    derive_seed(parent, fnv1a64(id.as_bytes()))
}
