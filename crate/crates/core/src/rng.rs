//! Seeded random streams.
//!
//! Every stream is xoshiro256++ whose 256-bit state is filled by SplitMix64
//! from a single `u64` seed. Derived quantities use fixed recipes so that
//! ports to other languages reproduce the same draws:
//!
//! * uniform `[0, 1)`: `(next_u64 >> 11) * 2^-53`
//! * standard normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`,
//!   one value per pair of uniforms
//! * integer below `n`: `(next_u64 as u128 * n) >> 64`
//! * child seeds: one SplitMix64 output from `seed ^ (tag * 0x9E3779B97F4A7C15)`

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub use rand_xoshiro::Xoshiro256PlusPlus as Rng;

/// Identifier recorded in documentation and reports.
pub const ALGORITHM: &str = "xoshiro256++/splitmix64";

/// Stream tags used when deriving child seeds.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const SESSION: u64 = 3;
    pub const HOLDOUT: u64 = 4;
}

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    SplitMix64::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

/// Seed for incremental session `session` (0-based) of a run seeded with `seed`.
pub fn session_seed(seed: u64, session: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::SESSION), session as u64)
}

#[inline]
pub fn uniform(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(1.0 - u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Uniform integer in `0..n` by multiply-shift. `n` must be nonzero.
#[inline]
pub fn below(rng: &mut Rng, n: u64) -> u64 {
    ((rng.next_u64() as u128 * n as u128) >> 64) as u64
}

/// In-place Fisher-Yates, walking from the back.
pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Moves the stream 2^128 draws ahead, giving a non-overlapping sub-stream.
pub fn jumped(rng: &Rng) -> Rng {
    let mut next = rng.clone();
    next.jump();
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..8).map({
            let mut r = seeded(1993);
            move |_| r.next_u64()
        }).collect();
        let mut r = seeded(1993);
        let b: Vec<u64> = (0..8).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(derive_seed(7, stream::INIT), derive_seed(7, stream::SHUFFLE));
    }

    #[test]
    fn normal_moments() {
        let mut r = seeded(42);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| standard_normal(&mut r)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = seeded(3);
        let mut v: Vec<u32> = (0..100).collect();
        shuffle(&mut r, &mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
        for _ in 0..1000 {
            assert!(below(&mut r, 7) < 7);
        }
    }

    #[test]
    fn jumped_stream_differs() {
        let base = seeded(5);
        let mut a = base.clone();
        let mut b = jumped(&base);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
