//! Seeded RNG plumbing.
//!
//! Every stochastic step in the crate draws from a ChaCha8 stream created
//! here, so a run is a pure function of its config and seed. Derived streams
//! (per round, per purpose) come from `mix`, which hashes the parent seed
//! with stream labels instead of splitting one sequential stream; this keeps
//! results independent of evaluation order.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Create a deterministic RNG stream from a seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a parent seed and two stream labels.
///
/// SplitMix64-style finalizer; collisions between distinct (a, b) labels are
/// not a practical concern at the scales used here.
pub fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One standard-normal draw via Box-Muller.
pub fn standard_normal<R: RngExt>(rng: &mut R) -> f64 {
    let u1 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
