//! Seeded RNG streams. Every randomized routine derives its generator from a
//! master seed plus a textual stream label plus an index, so results are
//! reproducible regardless of evaluation order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hashing;

/// Derives an independent RNG for `(master, label, index)`.
#[must_use]
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    let h = hashing::mix(hashing::mix(hashing::fnv1a(label.as_bytes()), master), index);
    ChaCha8Rng::seed_from_u64(h)
}
