//! Counter-based random streams.
//!
//! Every random draw in the crate is keyed by a tuple such as
//! `(seed, τ, channel)`, so results never depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream domains keep draws for different purposes independent.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Domain {
    LoadFactor = 1,
    MeasurementNoise = 2,
    Damping = 3,
    Jitter = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed, a domain and a list of counters into one 64-bit key.
pub fn key(seed: u64, domain: Domain, counters: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ (domain as u64).rotate_left(56));
    for &c in counters {
        h = splitmix64(h ^ c);
    }
    h
}

/// A generator seeded from a key.
pub fn stream(seed: u64, domain: Domain, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key(seed, domain, counters))
}

/// Uniform draw in [0, 1) from a single key, without building a full generator.
#[inline]
pub fn unit(seed: u64, domain: Domain, counters: &[u64]) -> f64 {
    (key(seed, domain, counters) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in [lo, hi].
pub fn uniform(seed: u64, domain: Domain, counters: &[u64], lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    stream(seed, domain, counters).random_range(lo..=hi)
}
