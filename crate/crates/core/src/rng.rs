//! Deterministic random-stream derivation.
//!
//! Every randomized component owns a ChaCha stream derived from a user seed
//! and a fixed label, so results are reproducible regardless of how work is
//! scheduled and unrelated components never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent RNG for (`seed`, `stream`).
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix a salt into a seed (splitmix64 finalizer), for deriving per-task seeds.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
