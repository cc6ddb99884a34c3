//! Bloomier filters: static functions from 64-bit keys to small integers.
//!
//! A filter is a table of `m` cells of `t` bits. A key is hashed to three
//! distinct cells and a `t`-bit mask; the stored value is the XOR of the
//! three cells and the mask. Construction solves for the cells so the
//! identity holds for every key in the build set. For other keys the XOR is
//! uniform over `[0, 2^t)`, and any result `>= k` is reported as absent, so
//! the false-positive rate is `k / 2^t`.

mod hash;
mod peel;

pub use hash::{hash_tuple, HashTuple};
pub use peel::find_peeling_order;

use hash::TupleHasher;

use crate::{Error, Result};

pub const DEFAULT_TABLE_MULTIPLIER: f64 = 1.25;
pub const DEFAULT_MAX_RETRIES: u32 = 20;

/// Smallest table that can hold three distinct indices.
pub const MIN_CELLS: usize = 3;

/// A partial function from distinct keys to values in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValueSet {
    entries: Vec<(u64, u32)>,
    k: u32,
}

impl KeyValueSet {
    /// Validates and sorts the entries by key.
    pub fn new(mut entries: Vec<(u64, u32)>, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("value count k must be at least 1"));
        }
        if let Some(&(key, v)) = entries.iter().find(|&&(_, v)| v >= k) {
            return Err(Error::input(format!("value {v} for key {key} is not below k = {k}")));
        }
        entries.sort_unstable_by_key(|&(key, _)| key);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::input(format!("duplicate key {}", w[0].0)));
        }
        Ok(Self { entries, k })
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(key, _)| key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Bits per cell, 1..=32.
    pub t: u32,
    /// Table-size multiplier; `m = ceil(c * n)`.
    pub c: f64,
    pub seed: u64,
    pub max_retries: u32,
}

impl FilterParams {
    pub fn new(t: u32, seed: u64) -> Self {
        Self {
            t,
            c: DEFAULT_TABLE_MULTIPLIER,
            seed,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn validate(&self, k: u32) -> Result<()> {
        if !(1..=32).contains(&self.t) {
            return Err(Error::param(format!("t must be in 1..=32, got {}", self.t)));
        }
        if !(self.c > 1.0) || !self.c.is_finite() {
            return Err(Error::param(format!("c must be a finite value above 1, got {}", self.c)));
        }
        if k as u64 >= 1u64 << self.t {
            return Err(Error::param(format!(
                "k = {k} values do not fit below 2^t with t = {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Number of cells for `n` keys: `ceil(c * n)`, never below [`MIN_CELLS`].
pub fn table_size(n: usize, c: f64) -> usize {
    ((c * n as f64).ceil() as usize).max(MIN_CELLS)
}

/// An immutable, constructed Bloomier filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomierFilter {
    n: usize,
    t: u32,
    k: u32,
    seed: u64,
    cells: Vec<u32>,
    hasher: TupleHasher,
}

impl BloomierFilter {
    /// Reassembles a filter from stored parts, validating cell widths.
    pub fn from_parts(n: usize, k: u32, t: u32, seed: u64, cells: Vec<u32>) -> Result<Self> {
        if k == 0 || !(1..=32).contains(&t) || k as u64 >= 1u64 << t {
            return Err(Error::param(format!("inconsistent filter parameters k = {k}, t = {t}")));
        }
        if let Some(&c) = cells.iter().find(|&&c| c as u64 >= 1u64 << t) {
            return Err(Error::input(format!("cell value {c} exceeds {t} bits")));
        }
        let hasher = TupleHasher::new(seed, cells.len(), t)?;
        Ok(Self {
            n,
            t,
            k,
            seed,
            cells,
            hasher,
        })
    }

    /// Returns the stored value for `key`, or `None` when the decoded value is `>= k`.
    #[inline]
    pub fn query(&self, key: u64) -> Option<u32> {
        let tup = self.hasher.tuple(key);
        let [a, b, c] = tup.slots;
        let r = self.cells[a as usize] ^ self.cells[b as usize] ^ self.cells[c as usize] ^ tup.mask;
        (r < self.k).then_some(r)
    }

    /// Number of keys the filter was built from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.cells.len()
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The seed that produced a successful construction.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Table payload in bits, `m * t`.
    pub fn payload_bits(&self) -> u64 {
        self.cells.len() as u64 * self.t as u64
    }
}

fn try_build(set: &KeyValueSet, t: u32, m: usize, seed: u64) -> Result<Option<BloomierFilter>> {
    let hasher = TupleHasher::new(seed, m, t)?;
    let keys: Vec<u64> = set.keys().collect();
    let tuples: Vec<HashTuple> = keys.iter().map(|&key| hasher.tuple(key)).collect();
    let Some(order) = peel::peel(&keys, &tuples, m) else {
        return Ok(None);
    };

    let mut cells = vec![0u32; m];
    for p in order.iter().rev() {
        let i = p.index as usize;
        let tup = &tuples[i];
        let lane = p.lane as usize;
        let own = tup.slots[lane] as usize;
        let others = tup.slots[(lane + 1) % 3] as usize;
        let third = tup.slots[(lane + 2) % 3] as usize;
        cells[own] = set.entries[i].1 ^ tup.mask ^ cells[others] ^ cells[third];
    }
    Ok(Some(BloomierFilter {
        n: set.len(),
        t,
        k: set.k,
        seed,
        cells,
        hasher,
    }))
}

/// Builds a filter for `set`, retrying with `seed + 1, seed + 2, ...` on peeling failure.
pub fn construct(set: &KeyValueSet, params: &FilterParams) -> Result<BloomierFilter> {
    params.validate(set.k)?;
    let m = table_size(set.len(), params.c);
    for attempt in 0..=params.max_retries {
        if let Some(filter) = try_build(set, params.t, m, params.seed.wrapping_add(attempt as u64))? {
            return Ok(filter);
        }
    }
    Err(Error::ConstructionFailed {
        retries: params.max_retries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpMeasurement {
    pub count: u64,
    pub probes: u64,
    pub rate: f64,
}

/// Counts non-null answers over a sample of keys outside the build set.
pub fn measure_fp_rate(filter: &BloomierFilter, non_keys: &[u64]) -> Result<FpMeasurement> {
    if non_keys.is_empty() {
        return Err(Error::input("false-positive sample is empty"));
    }
    let count = non_keys.iter().filter(|&&key| filter.query(key).is_some()).count() as u64;
    let probes = non_keys.len() as u64;
    Ok(FpMeasurement {
        count,
        probes,
        rate: count as f64 / probes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_set(n: usize, k: u32, seed: u64) -> KeyValueSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keys = HashSet::with_capacity(n);
        while keys.len() < n {
            keys.insert(rng.random::<u64>());
        }
        let entries = keys.into_iter().map(|key| (key, rng.random_range(0..k))).collect();
        KeyValueSet::new(entries, k).unwrap()
    }

    fn non_keys(set: &KeyValueSet, count: usize, seed: u64) -> Vec<u64> {
        let members: HashSet<u64> = set.keys().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let key = rng.random::<u64>();
            if !members.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    #[test]
    fn single_entry() {
        let set = KeyValueSet::new(vec![(5, 2)], 3).unwrap();
        let filter = construct(&set, &FilterParams::new(8, 1)).unwrap();
        assert_eq!(filter.query(5), Some(2));
        // ceil(1.25) = 2 cells cannot hold three distinct indices
        assert_eq!(filter.m(), MIN_CELLS);
    }

    #[test]
    fn exact_on_random_sets() {
        let set = random_set(1000, 9, 17);
        let filter = construct(&set, &FilterParams::new(8, 3)).unwrap();
        for &(key, v) in set.entries() {
            assert_eq!(filter.query(key), Some(v));
        }
        assert_eq!(filter.m(), 1250);
        assert_eq!(filter.payload_bits(), 10_000);
        assert!(filter.cells().iter().all(|&c| c < 256));
    }

    #[test]
    fn empty_set_builds_minimal_table() {
        let set = KeyValueSet::new(vec![], 4).unwrap();
        let filter = construct(&set, &FilterParams::new(6, 0)).unwrap();
        assert_eq!(filter.m(), MIN_CELLS);
        assert!(filter.cells().iter().all(|&c| c == 0));
    }

    #[test]
    fn deterministic_output() {
        let set = random_set(3000, 10, 5);
        let a = construct(&set, &FilterParams::new(8, 99)).unwrap();
        let b = construct(&set, &FilterParams::new(8, 99)).unwrap();
        assert_eq!(a, b);
        let c = construct(&set, &FilterParams::new(8, 100)).unwrap();
        assert_ne!(a.cells(), c.cells());
    }

    #[test]
    fn lenet5_dns_fc0_size() {
        // 400,000 weights at 0.73% nonzero -> 2,920 keys
        let set = random_set(2920, 10, 1);
        let filter = construct(&set, &FilterParams::new(8, 1)).unwrap();
        assert_eq!(filter.m(), 3650);
        let kb = filter.payload_bits() as f64 / 8.0 / 1024.0;
        assert!((kb - 3.52).abs() / 3.52 < 0.02, "{kb} KB");
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(KeyValueSet::new(vec![(1, 3)], 3), Err(Error::InvalidInput(_))));
        assert!(matches!(KeyValueSet::new(vec![(1, 0), (1, 1)], 3), Err(Error::InvalidInput(_))));
        assert!(matches!(KeyValueSet::new(vec![], 0), Err(Error::InvalidInput(_))));
        let set = KeyValueSet::new(vec![(1, 0)], 16).unwrap();
        assert!(matches!(construct(&set, &FilterParams::new(4, 0)), Err(Error::InvalidParameter(_))));
        let mut p = FilterParams::new(8, 0);
        p.c = 1.0;
        assert!(matches!(construct(&set, &p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn exhausted_retries_report_count() {
        // c barely above 1 never peels for thousands of keys
        let set = random_set(5000, 4, 2);
        let mut p = FilterParams::new(8, 0);
        p.c = 1.01;
        p.max_retries = 2;
        assert!(matches!(construct(&set, &p), Err(Error::ConstructionFailed { retries: 2 })));
    }

    #[test]
    fn retries_move_the_seed_forward() {
        // at c = 1.20 peeling is marginal; any success must carry a seed in range
        let set = random_set(2000, 4, 3);
        let mut p = FilterParams::new(8, 40);
        p.c = 1.2;
        p.max_retries = 20;
        if let Ok(f) = construct(&set, &p) {
            assert!((40..=60).contains(&f.seed()));
            for &(key, v) in set.entries() {
                assert_eq!(f.query(key), Some(v));
            }
        }
    }

    fn binomial_ok(count: u64, probes: u64, p: f64) -> bool {
        let mean = probes as f64 * p;
        let sd = (probes as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - mean).abs() <= 3.0 * sd
    }

    #[test]
    fn fp_rate_k4_t6() {
        let set = random_set(20_000, 4, 8);
        let filter = construct(&set, &FilterParams::new(6, 8)).unwrap();
        let fp = measure_fp_rate(&filter, &non_keys(&set, 1_000_000, 9)).unwrap();
        assert!(binomial_ok(fp.count, fp.probes, 4.0 / 64.0), "{fp:?}");
    }

    #[test]
    fn fp_rate_k9_t8_and_halving() {
        let set = random_set(20_000, 9, 10);
        let probes = non_keys(&set, 1_000_000, 11);
        let f8 = construct(&set, &FilterParams::new(8, 1)).unwrap();
        let f9 = construct(&set, &FilterParams::new(9, 1)).unwrap();
        let r8 = measure_fp_rate(&f8, &probes).unwrap();
        let r9 = measure_fp_rate(&f9, &probes).unwrap();
        assert!(binomial_ok(r8.count, r8.probes, 9.0 / 256.0), "{r8:?}");
        assert!(binomial_ok(r9.count, r9.probes, 9.0 / 512.0), "{r9:?}");
        let ratio = r9.rate / r8.rate;
        assert!((0.45..0.55).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn near_saturated_range() {
        let set = random_set(1000, 63, 12);
        let filter = construct(&set, &FilterParams::new(6, 1)).unwrap();
        let fp = measure_fp_rate(&filter, &non_keys(&set, 200_000, 13)).unwrap();
        assert!(binomial_ok(fp.count, fp.probes, 63.0 / 64.0), "{fp:?}");
    }

    #[test]
    fn fp_sample_must_be_nonempty() {
        let set = random_set(10, 2, 1);
        let filter = construct(&set, &FilterParams::new(4, 1)).unwrap();
        assert!(matches!(measure_fp_rate(&filter, &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn from_parts_round_trip() {
        let set = random_set(100, 5, 4);
        let f = construct(&set, &FilterParams::new(7, 4)).unwrap();
        let g = BloomierFilter::from_parts(f.n(), f.k(), f.t(), f.seed(), f.cells().to_vec()).unwrap();
        assert_eq!(f, g);
        assert!(BloomierFilter::from_parts(1, 5, 2, 0, vec![0; 3]).is_err());
        assert!(BloomierFilter::from_parts(1, 2, 2, 0, vec![0, 4, 0]).is_err());
    }
}
