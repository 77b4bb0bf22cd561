//! Seedable random streams.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`). Uniforms use the top 53 bits shifted into the open
//! interval `(0, 1)`: `u = ((x >> 11) + 0.5) / 2^53`. Normal variates are
//! `Φ⁻¹(u)`, one uniform per normal. Sub-streams for parallel work are seeded
//! with `seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: Xoshiro256PlusPlus,
    normal: Normal,
}

const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            normal: Normal::standard(),
        }
    }

    /// Independent stream number `stream` derived from `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ stream.wrapping_add(1).wrapping_mul(STREAM_MIX))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal by inverse CDF.
    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }
}
