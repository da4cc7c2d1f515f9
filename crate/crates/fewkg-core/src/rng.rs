//! Seeded random streams.
//!
//! Every sampling site in the crate takes an explicit `&mut ChaCha8Rng`
//! threaded by the caller; there is no ambient global state. Substreams are
//! derived with a splitmix finalizer so that independent concerns (parameter
//! init, task sampling, evaluation) can be given decorrelated streams from
//! one run seed.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Primary stream for a run seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Decorrelated substream for (seed, tag).
pub fn substream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(seed, tag))
}

/// Derived seed for handing to APIs that take a seed rather than a stream.
pub fn subseed(seed: u64, tag: u64) -> u64 {
    splitmix(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Standard normal draw via Box-Muller; libm keeps it identical across
/// platforms and in no_std builds.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Uniform draw on [-b, b].
pub fn uniform_sym(rng: &mut ChaCha8Rng, b: f64) -> f64 {
    b * (2.0 * rng.random::<f64>() - 1.0)
}
