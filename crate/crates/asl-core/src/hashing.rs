//! Stable string hashing used for feature buckets, embedding buckets, and
//! state digests. The std `DefaultHasher` is not guaranteed stable across
//! toolchain versions, while checkpoints and run logs here must be, so a
//! fixed FNV-1a implementation is used throughout.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes.
#[must_use]
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Folds an additional word into an existing hash.
#[must_use]
pub fn mix(h: u64, word: u64) -> u64 {
    let mut out = h;
    for i in 0..8 {
        out ^= (word >> (8 * i)) & 0xff;
        out = out.wrapping_mul(FNV_PRIME);
    }
    out
}

/// Hashes a sequence of string parts with a salt, order sensitive.
#[must_use]
pub fn hash_parts(salt: u64, parts: &[&str]) -> u64 {
    let mut h = mix(FNV_OFFSET, salt);
    for p in parts {
        h = mix(h, fnv1a(p.as_bytes()));
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
