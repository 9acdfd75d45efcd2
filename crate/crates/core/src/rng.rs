//! Seeded randomness with a fixed, documented draw procedure.
//!
//! The bit source is xoshiro256++ seeded through SplitMix64 (the reference
//! seeding routine). All derived draws are defined in terms of `next_u64`:
//!
//! * `uniform`: top 53 bits scaled by 2^-53, giving a value in [0, 1).
//! * `gauss`: Box–Muller, `sqrt(-2 ln(1 - u1)) * cos(2π u2)` with two fresh
//!   uniforms per call. The sine branch is discarded so every call consumes
//!   exactly two words.
//! * `below(n)`: rejection sampling on the largest multiple of `n` that fits
//!   in 64 bits, then `x % n`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Single-owner generator. Parallel code must derive child seeds with
/// [`Rng::derive_seed`] rather than share one instance.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mixes `(seed, stream)` into an independent child seed (SplitMix64 finalizer).
    pub fn derive_seed(seed: u64, stream: u64) -> u64 {
        let mut z = seed
            .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw.
    pub fn gauss(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.gauss()
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct elements of `pool`, drawn uniformly without replacement
    /// (partial Fisher–Yates on a copy). Order is the draw order.
    pub fn sample<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        assert!(k <= pool.len(), "sample size exceeds pool");
        let mut buf = pool.to_vec();
        for i in 0..k {
            let j = i + self.below(buf.len() - i);
            buf.swap(i, j);
        }
        buf.truncate(k);
        buf
    }
}
