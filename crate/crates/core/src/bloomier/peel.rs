//! Greedy singleton elimination over the 3-uniform hypergraph of key tuples.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::hash::{HashTuple, TupleHasher};
use crate::Result;

/// One peeled key and the lane (0, 1 or 2) of the cell it owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Peeled {
    pub index: u32,
    pub lane: u8,
}

/// Peels keys in order of lowest key value among those owning a singleton cell.
///
/// Returns `None` when the remaining keys form a 2-core. On success the
/// returned order is the removal order; assigning cells in reverse keeps
/// each key's owned cell untouched by every key assigned before it.
pub(crate) fn peel(keys: &[u64], tuples: &[HashTuple], m: usize) -> Option<Vec<Peeled>> {
    debug_assert_eq!(keys.len(), tuples.len());
    let mut count = vec![0u32; m];
    let mut xor = vec![0u32; m];
    for (i, tup) in tuples.iter().enumerate() {
        for &s in &tup.slots {
            count[s as usize] += 1;
            xor[s as usize] ^= i as u32;
        }
    }

    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = count
        .iter()
        .zip(&xor)
        .filter(|(&c, _)| c == 1)
        .map(|(_, &i)| Reverse((keys[i as usize], i)))
        .collect();

    let mut removed = vec![false; keys.len()];
    let mut order = Vec::with_capacity(keys.len());
    while let Some(Reverse((_, i))) = heap.pop() {
        if removed[i as usize] {
            continue;
        }
        let tup = &tuples[i as usize];
        // the cell that queued this key is still a singleton: only removals lower counts
        let lane = tup
            .slots
            .iter()
            .position(|&s| count[s as usize] == 1)
            .expect("queued key owns a singleton cell");
        removed[i as usize] = true;
        order.push(Peeled {
            index: i,
            lane: lane as u8,
        });
        for &s in &tup.slots {
            let s = s as usize;
            count[s] -= 1;
            xor[s] ^= i;
            if count[s] == 1 {
                heap.push(Reverse((keys[xor[s] as usize], xor[s])));
            }
        }
    }

    (order.len() == keys.len()).then_some(order)
}

/// Finds a peeling order for `keys` under hash seed `seed` and a table of `m` cells.
///
/// Returns `(key, assigned cell)` pairs in removal order, or `Ok(None)` if
/// greedy elimination gets stuck for this seed. Keys must be distinct.
pub fn find_peeling_order(keys: &[u64], seed: u64, m: usize) -> Result<Option<Vec<(u64, u32)>>> {
    // the mask lane is irrelevant to peeling
    let hasher = TupleHasher::new(seed, m, 1)?;
    let tuples: Vec<HashTuple> = keys.iter().map(|&k| hasher.tuple(k)).collect();
    Ok(peel(keys, &tuples, m).map(|order| {
        order
            .into_iter()
            .map(|p| {
                let i = p.index as usize;
                (keys[i], tuples[i].slots[p.lane as usize])
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloomier::hash::hash_tuple;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn random_keys(n: usize, seed: u64) -> Vec<u64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(n);
        while seen.len() < n {
            seen.insert(rng.random::<u64>());
        }
        seen.into_iter().collect()
    }

    #[test]
    fn empty_set() {
        assert_eq!(find_peeling_order(&[], 1, 3).unwrap(), Some(vec![]));
    }

    #[test]
    fn single_key() {
        let order = find_peeling_order(&[77], 5, 3).unwrap().unwrap();
        assert_eq!(order.len(), 1);
        let tup = hash_tuple(77, 5, 3, 1).unwrap();
        assert!(tup.slots.contains(&order[0].1));
    }

    #[test]
    fn reverse_order_slots_are_untouched_by_earlier_assignments() {
        let keys = random_keys(2000, 3);
        let m = 2500;
        let order = find_peeling_order(&keys, 9, m).unwrap().expect("peels");
        let mut seen: Vec<u64> = order.iter().map(|&(k, _)| k).collect();
        seen.sort_unstable();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(seen, sorted);

        let mut touched = vec![false; m];
        for &(key, slot) in order.iter().rev() {
            assert!(!touched[slot as usize], "slot of {key} touched earlier");
            for s in hash_tuple(key, 9, m, 1).unwrap().slots {
                touched[s as usize] = true;
            }
        }
    }

    #[test]
    fn overloaded_table_fails() {
        // c = 1.0 is below the peeling threshold of ~1.22
        let keys = random_keys(5000, 4);
        assert_eq!(find_peeling_order(&keys, 1, 5000).unwrap(), None);
    }

    #[test]
    fn lowest_key_goes_first() {
        let keys = random_keys(500, 8);
        let m = 625;
        let (seed, order) = (0..)
            .find_map(|seed| find_peeling_order(&keys, seed, m).unwrap().map(|o| (seed, o)))
            .unwrap();
        // the first removed key is the lowest among keys owning a singleton cell
        let mut count = vec![0u32; m];
        for &k in &keys {
            for s in hash_tuple(k, seed, m, 1).unwrap().slots {
                count[s as usize] += 1;
            }
        }
        let lowest = keys
            .iter()
            .copied()
            .filter(|&k| {
                hash_tuple(k, seed, m, 1)
                    .unwrap()
                    .slots
                    .iter()
                    .any(|&s| count[s as usize] == 1)
            })
            .min()
            .unwrap();
        assert_eq!(order[0].0, lowest);
    }

    #[test]
    fn first_seed_success_rate_at_c_1_25() {
        let n = 10_000;
        let m = (1.25 * n as f64).ceil() as usize;
        let successes = (0..100u64)
            .filter(|&trial| {
                let keys = random_keys(n, 1000 + trial);
                find_peeling_order(&keys, trial, m).unwrap().is_some()
            })
            .count();
        assert!(successes >= 95, "{successes}/100");
    }
}
