//! Seeded xoshiro256** stream.
//!
//! The state is expanded from a 64-bit seed with splitmix64. Draw and shuffle
//! sequences are part of the reproducibility contract: `next_below` uses
//! rejection sampling on the smallest covering bit mask and `shuffle` is a
//! Fisher-Yates pass from the last index down.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 step. Advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for restart `restart` of a run seeded with `base`.
///
/// With `base == 0` this is exactly `restart * 53 + 17`.
pub fn restart_seed(base: u64, restart: u64) -> u64 {
    restart.wrapping_mul(53).wrapping_add(17) ^ base.wrapping_mul(GOLDEN_GAMMA)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    state: [u64; 4],
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { state, seed }
    }

    /// Rebuilds a stream from saved state words.
    pub fn from_parts(seed: u64, state: [u64; 4]) -> Self {
        Self { state, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> [u64; 4] {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform value in `[0, bound)`. Returns `None` for `bound == 0`.
    pub fn next_below(&mut self, bound: u64) -> Option<u64> {
        if bound == 0 {
            return None;
        }
        let mask = if bound == 1 {
            0
        } else {
            u64::MAX >> (bound - 1).leading_zeros()
        };
        loop {
            let x = self.next_u64() & mask;
            if x < bound {
                return Some(x);
            }
        }
    }

    /// Uniform index in `[0, bound)`; panics on an empty range.
    pub fn index(&mut self, bound: usize) -> usize {
        self.next_below(bound as u64).expect("empty index range") as usize
    }

    /// Uniform value in the inclusive range `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty range");
        let span = hi - lo;
        if span == u64::MAX {
            return self.next_u64();
        }
        lo + self.next_below(span + 1).unwrap()
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of `0..len`.
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..len).collect();
        self.shuffle(&mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of splitmix64 seeded with 0.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(splitmix64(&mut s), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn xoshiro_reference_step() {
        // State 1,2,3,4 gives 11520 as first xoshiro256** output.
        let mut r = RngStream::from_parts(0, [1, 2, 3, 4]);
        assert_eq!(r.next_u64(), 11520);
        assert_eq!(r.next_u64(), 0);
        assert_eq!(r.next_u64(), 1_509_978_240);
    }

    #[test]
    fn bound_one_is_zero() {
        let mut r = RngStream::new(7);
        for _ in 0..100 {
            assert_eq!(r.next_below(1), Some(0));
        }
        assert_eq!(r.next_below(0), None);
    }

    #[test]
    fn die_frequencies_are_sane() {
        let mut r = RngStream::new(42);
        let mut freq = [0u32; 6];
        for _ in 0..1000 {
            freq[r.next_below(6).unwrap() as usize] += 1;
        }
        for f in freq {
            assert!((120..=220).contains(&f), "{freq:?}");
        }
        // Chi-square against uniform, 5 dof; 20.5 is the 0.999 quantile.
        let chi: f64 = freq
            .iter()
            .map(|&f| (f as f64 - 1000.0 / 6.0).powi(2) / (1000.0 / 6.0))
            .sum();
        assert!(chi < 20.5, "chi2 = {chi}");
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = RngStream::new(123);
        let mut b = RngStream::new(123);
        for _ in 0..10_000 {
            assert_eq!(a.next_below(1000), b.next_below(1000));
        }
        let mut x: Vec<u32> = (0..50).collect();
        let mut y = x.clone();
        RngStream::new(9).shuffle(&mut x);
        RngStream::new(9).shuffle(&mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn restart_seed_convention() {
        assert_eq!(restart_seed(0, 0), 17);
        assert_eq!(restart_seed(0, 5), 5 * 53 + 17);
        assert_ne!(restart_seed(1, 5), restart_seed(0, 5));
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut r = RngStream::new(1);
        let mut p = r.permutation(37);
        p.sort_unstable();
        assert_eq!(p, (0..37).collect::<Vec<_>>());
    }
}
