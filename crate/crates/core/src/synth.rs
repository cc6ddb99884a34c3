//! Seeded synthetic inputs: dense Gaussian weight matrices and random sparse layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::simplify::{prune, ClusterModel, SimplifiedLayer, WeightMatrix};
use crate::{Error, Result};

/// `rows x cols` matrix with i.i.d. `N(0, std^2)` entries.
pub fn gaussian_matrix(rows: usize, cols: usize, std: f32, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, std).expect("finite standard deviation");
    let values = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
    WeightMatrix::new(rows, cols, values).expect("shape matches")
}

/// A layer with `ceil(nnz_ratio * rows * cols)` uniformly placed positions
/// and uniform labels over `k` evenly spaced nonzero centroids.
///
/// Builds the layer directly, without a dense matrix, so large shapes
/// such as 25088 x 4096 stay cheap.
pub fn random_layer(rows: usize, cols: usize, nnz_ratio: f64, k: u32, seed: u64) -> Result<SimplifiedLayer> {
    if !(nnz_ratio > 0.0 && nnz_ratio <= 1.0) {
        return Err(Error::param(format!("nonzero ratio must be in (0, 1], got {nnz_ratio}")));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let size = rows * cols;
    let nnz = prune::kept_count(nnz_ratio, size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut taken = vec![0u64; size.div_ceil(64)];
    let mut placed = 0usize;
    if nnz * 2 > size {
        // dense request: mark everything, then knock out the complement
        for i in 0..size {
            taken[i / 64] |= 1 << (i % 64);
        }
        placed = size;
        while placed > nnz {
            let i = rng.random_range(0..size);
            if taken[i / 64] >> (i % 64) & 1 == 1 {
                taken[i / 64] &= !(1 << (i % 64));
                placed -= 1;
            }
        }
    } else {
        while placed < nnz {
            let i = rng.random_range(0..size);
            if taken[i / 64] >> (i % 64) & 1 == 0 {
                taken[i / 64] |= 1 << (i % 64);
                placed += 1;
            }
        }
    }
    let positions: Vec<u64> = (0..size as u64)
        .filter(|&i| taken[(i / 64) as usize] >> (i % 64) & 1 == 1)
        .collect();
    let labels = (0..positions.len()).map(|_| rng.random_range(0..k)).collect();
    let centroids = (0..k)
        .map(|j| -1.0 + 2.0 * (j as f32 + 0.5) / k as f32)
        .map(|c| if c == 0.0 { 0.5 / k as f32 } else { c })
        .collect();
    SimplifiedLayer::new(rows, cols, positions, labels, ClusterModel::new(centroids)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_matrix() {
        assert_eq!(gaussian_matrix(10, 10, 1.0, 5), gaussian_matrix(10, 10, 1.0, 5));
        assert_ne!(gaussian_matrix(10, 10, 1.0, 5), gaussian_matrix(10, 10, 1.0, 6));
    }

    #[test]
    fn random_layer_counts() {
        let l = random_layer(300, 100, 0.018, 10, 1).unwrap();
        assert_eq!(l.nnz(), 540);
        assert!(l.labels().iter().all(|&x| x < 10));
        let dense = random_layer(10, 10, 0.9, 3, 2).unwrap();
        assert_eq!(dense.nnz(), 90);
        assert!(dense.model().centroids().iter().all(|&c| c != 0.0));
        let odd = random_layer(4, 4, 0.5, 3, 2).unwrap();
        assert!(odd.model().centroids().iter().all(|&c| c != 0.0));
    }
}
