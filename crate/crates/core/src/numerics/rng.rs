//! Seeded pseudo-randomness.
//!
//! The generator is xoshiro256** (Blackman & Vigna), with its 256-bit state
//! filled from the 64-bit seed by SplitMix64. Derived draws are defined
//! explicitly so other implementations can reproduce the stream:
//!
//! * `next_f64`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `uniform(lo, hi)`: `lo + (hi - lo) * next_f64`.
//! * `normal()`: Box–Muller cosine branch on two consecutive `next_f64`
//!   draws `u1, u2`: `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.
//! * `index(n)`: `floor(next_f64 * n)`, clamped to `n - 1`.
//! * `shuffle`: Fisher–Yates from the back, `j = index(i + 1)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Clone, Debug)]
pub struct Rng(Xoshiro256StarStar);

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::new(seed)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.uniform(lo, hi)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over empty range");
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
