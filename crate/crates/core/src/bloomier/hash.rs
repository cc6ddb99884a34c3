//! Seeded hash family producing three distinct cell indices and a mask per key.
//!
//! Every output lane is an independent application of a 64-bit finalizer to
//! `(seed, key, lane)`. When two index lanes collide, the colliding lane is
//! re-derived from the next lane number until the three indices are distinct.

use crate::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_SALT: u64 = 0x5be0_cd19_137e_2179;
const MASK_SALT: u64 = 0xd6e8_feb8_6659_fd93;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The three cell indices and the XOR mask derived for one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashTuple {
    pub slots: [u32; 3],
    pub mask: u32,
}

/// Precomputed hashing state for a fixed `(seed, m, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TupleHasher {
    seed_mix: u64,
    m: u64,
    mask_shift: u32,
}

impl TupleHasher {
    pub(crate) fn new(seed: u64, m: usize, t: u32) -> Result<Self> {
        if m < 3 {
            return Err(Error::param(format!(
                "table needs at least 3 cells to produce distinct indices, got {m}"
            )));
        }
        if m > u32::MAX as usize {
            return Err(Error::param(format!("table of {m} cells exceeds 32-bit indexing")));
        }
        if !(1..=32).contains(&t) {
            return Err(Error::param(format!("cell width must be in 1..=32 bits, got {t}")));
        }
        Ok(Self {
            seed_mix: mix64(seed ^ SEED_SALT),
            m: m as u64,
            mask_shift: 64 - t,
        })
    }

    #[inline]
    fn reduce(&self, h: u64) -> u32 {
        ((h as u128 * self.m as u128) >> 64) as u32
    }

    #[inline]
    pub(crate) fn tuple(&self, key: u64) -> HashTuple {
        let base = mix64(key ^ self.seed_mix);
        let mut lane = 0u64;
        let mut next = || {
            lane += 1;
            self.reduce(mix64(base.wrapping_add(lane.wrapping_mul(GOLDEN))))
        };
        let h0 = next();
        let mut h1 = next();
        while h1 == h0 {
            h1 = next();
        }
        let mut h2 = next();
        while h2 == h0 || h2 == h1 {
            h2 = next();
        }
        let mask = (mix64(base ^ MASK_SALT) >> self.mask_shift) as u32;
        HashTuple {
            slots: [h0, h1, h2],
            mask,
        }
    }
}

/// Hashes `key` into three pairwise-distinct indices in `[0, m)` and a mask in `[0, 2^t)`.
pub fn hash_tuple(key: u64, seed: u64, m: usize, t: u32) -> Result<HashTuple> {
    Ok(TupleHasher::new(seed, m, t)?.tuple(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = hash_tuple(42, 7, 100, 8).unwrap();
        let b = hash_tuple(42, 7, 100, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_and_in_range() {
        let [h0, h1, h2] = hash_tuple(42, 7, 100, 8).unwrap().slots;
        assert!(h0 != h1 && h1 != h2 && h0 != h2);
        for key in 0..10_000u64 {
            let tup = hash_tuple(key, 3, 3, 5).unwrap();
            let mut s = tup.slots;
            s.sort_unstable();
            assert_eq!(s, [0, 1, 2]);
            assert!(tup.mask < 32);
        }
    }

    #[test]
    fn seed_changes_output() {
        let differing = (0..100u64)
            .filter(|&k| hash_tuple(k, 1, 1000, 16).unwrap() != hash_tuple(k, 2, 1000, 16).unwrap())
            .count();
        assert_eq!(differing, 100);
    }

    #[test]
    fn full_width_mask() {
        let tup = hash_tuple(9, 9, 10, 32).unwrap();
        assert!(tup.slots.iter().all(|&s| s < 10));
    }

    #[test]
    fn rejects_small_tables() {
        assert!(matches!(hash_tuple(1, 1, 2, 8), Err(Error::InvalidParameter(_))));
        assert!(matches!(hash_tuple(1, 1, 10, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(hash_tuple(1, 1, 10, 33), Err(Error::InvalidParameter(_))));
    }

    // Chi-square over index occupancy, 1000 cells, 10^6 keys (3 * 10^6 draws).
    // Critical value for 999 degrees of freedom at p = 0.001 is ~1143.9.
    #[test]
    fn index_occupancy_is_uniform() {
        use rand::{Rng, SeedableRng};
        let m = 1000usize;
        let hasher = TupleHasher::new(0xdead_beef, m, 8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut bins = vec![0u64; m];
        let keys = 1_000_000u64;
        for _ in 0..keys {
            for s in hasher.tuple(rng.random()).slots {
                bins[s as usize] += 1;
            }
        }
        let expected = (3 * keys) as f64 / m as f64;
        let chi2: f64 = bins
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 1143.9, "chi-square {chi2}");
    }
}
