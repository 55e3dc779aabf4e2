//! Seeded, splittable randomness. Every random choice in the crate descends
//! from one `u64` seed through named substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// FNV-1a: stable across builds, unlike std's hasher
fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Independent generator for `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}
