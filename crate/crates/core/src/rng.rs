//! Seeded, splittable random streams.
//!
//! Every consumer of randomness asks for a named stream derived from the run
//! seed, so adding a new consumer never perturbs the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

/// Independent stream for `(seed, label, index)`, e.g. one per worker or grid point.
pub fn substream(seed: u64, label: &str, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(label));
    rng
}
