//! Deterministic random streams. Every consumer derives its generator from the
//! master seed and a stream label, so results do not depend on thread count
//! or evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `(a, b)` under `seed`.
pub fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(b);
    rng
}

/// A child seed for stream `(a, b)`.
pub fn derive(seed: u64, a: u64, b: u64) -> u64 {
    stream(seed, a, b).gen()
}

/// `n` independent uniform signs.
pub fn signs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Sign pattern number `mask` in exhaustive enumeration: bit `j` set means `-1`.
pub fn signs_from_mask(mask: u64, n: usize) -> Vec<f64> {
    (0..n).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()
}
