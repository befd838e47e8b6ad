//! Seeded randomness with a fixed, portable draw schedule.
//!
//! Every randomized component owns one [`PolicyRng`]: xoshiro256++ whose
//! 256-bit state is expanded from a `u64` seed by SplitMix64 (the reference
//! seeding procedure of the xoshiro authors). Derived draws are defined
//! bit-exactly so another implementation can reproduce a run from its seed:
//!
//! * `uniform()`: `(next_u64() >> 11) * 2^-53`, a double in `[0, 1)`.
//! * `index(n)`: `(next_u64() as u128 * n) >> 64`, an integer in `[0, n)`.
//!
//! SAGE consumes exactly one `uniform()` per prefetch.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct PolicyRng(Xoshiro256PlusPlus);

impl PolicyRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by widening multiply. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = PolicyRng::new(42);
        let mut b = PolicyRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(PolicyRng::new(1).next_u64(), PolicyRng::new(2).next_u64());
    }

    #[test]
    fn seed_zero_matches_reference_stream() {
        // SplitMix64(0) expands to the state below; first xoshiro256++ output
        // computed by hand from the reference algorithm.
        let mut sm = 0u64;
        let mut splitmix = || {
            sm = sm.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        };
        let s: [u64; 4] = [splitmix(), splitmix(), splitmix(), splitmix()];
        let expected = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        assert_eq!(PolicyRng::new(0).next_u64(), expected);
    }

    #[test]
    fn derived_draws_in_range() {
        let mut r = PolicyRng::new(7);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.index(5) < 5);
        }
    }
}
