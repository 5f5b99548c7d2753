//! Counter-based pseudorandom generator.
//!
//! The generator is a SplitMix64 stream: draw `i` of a stream seeded with
//! `s` is `mix64(s + (i + 1) * GAMMA)` where `GAMMA` is the 64-bit golden
//! ratio and `mix64` is Stafford's "variant 13" finalizer. Because each
//! output is a pure function of `(seed, counter)`, streams can be split
//! hierarchically with [`Rng::derive`] and every consumer sees the same
//! values regardless of platform, build, or evaluation order.

use alloc::vec::Vec;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stafford variant 13 of the SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable, counter-based generator. Cheap to clone; clones continue the
/// same stream independently.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, counter: 0 }
    }

    /// Child stream keyed by `tag`. Distinct tags give statistically
    /// independent streams; deriving does not advance `self`.
    pub fn derive(&self, tag: u64) -> Rng {
        Rng {
            seed: mix64(self.seed ^ mix64(tag.wrapping_add(GAMMA))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, n)` via Lemire's multiply-shift reduction.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform in `[0, 1)` with 24 bits of mantissa.
    #[inline]
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u64 << 24) as f32)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.next_f32()
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f32) -> bool {
        self.next_f32() < p
    }

    /// Standard normal via Box-Muller (two draws per sample).
    pub fn normal(&mut self) -> f32 {
        let u1 = (self.next_f32() + 1e-12).min(1.0);
        let u2 = self.next_f32();
        let r = libm::sqrtf(-2.0 * libm::logf(u1));
        r * libm::cosf(2.0 * core::f32::consts::PI * u2)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices out of `0..len`, in draw order.
    pub fn sample_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..len).collect();
        self.shuffle(&mut pool);
        pool.truncate(k);
        pool
    }
}
