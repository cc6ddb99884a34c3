//! Lloyd's algorithm on scalars.
//!
//! Values are sorted once; because centroids stay strictly increasing, each
//! cluster is a contiguous run of the sorted values and assignment is a
//! single merge-like sweep.

use super::ClusterModel;
use crate::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub model: ClusterModel,
    /// Cluster index for each input value, in input order.
    pub labels: Vec<u32>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_trace: Vec<f64>,
}

impl Clustering {
    pub fn inertia(&self) -> f64 {
        self.inertia_trace.last().copied().unwrap_or(0.0)
    }
}

/// Nearest-centroid sweep over sorted values; ties go to the lower index.
/// `centroids` must be strictly increasing.
fn assign_sorted(sorted: &[f64], centroids: &[f64], out: &mut [u32]) {
    let mut j = 0usize;
    for (v, label) in sorted.iter().zip(out.iter_mut()) {
        while j + 1 < centroids.len() && (v - centroids[j + 1]).abs() < (v - centroids[j]).abs() {
            j += 1;
        }
        *label = j as u32;
    }
}

fn inertia(sorted: &[f64], centroids: &[f64], labels: &[u32]) -> f64 {
    sorted
        .iter()
        .zip(labels)
        .map(|(v, &l)| (v - centroids[l as usize]).powi(2))
        .sum()
}

fn quantile_seeds(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let pick = |src: &[f64], j: usize| src[((j as f64 + 0.5) * src.len() as f64 / k as f64) as usize];
    let seeds: Vec<f64> = (0..k).map(|j| pick(sorted, j)).collect();
    if seeds.windows(2).all(|w| w[0] < w[1]) {
        return seeds;
    }
    // repeated values collapsed some quantiles; seed from the distinct values instead
    let mut distinct = Vec::with_capacity(n);
    for &v in sorted {
        if distinct.last() != Some(&v) {
            distinct.push(v);
        }
    }
    (0..k).map(|j| pick(&distinct, j)).collect()
}

/// Clusters `values` into `k` groups.
///
/// Seeds are `k` evenly spaced quantiles. Iteration stops when no centroid
/// moves by `tol` or more, or after `max_iters` updates. A cluster that ends
/// up empty is re-seeded at the value farthest from its current centroid.
pub fn kmeans_1d(values: &[f32], k: u32, max_iters: usize, tol: f64) -> Result<Clustering> {
    let k = k as usize;
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if values.len() < k {
        return Err(Error::input(format!("{} values cannot form {k} clusters", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("values must be finite"));
    }

    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i as usize] as f64).collect();
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] < w[1]).count();
    if distinct < k {
        return Err(Error::input(format!("{distinct} distinct values cannot form {k} clusters")));
    }

    let mut centroids = quantile_seeds(&sorted, k);
    let mut labels = vec![0u32; sorted.len()];
    let mut inertia_trace = Vec::new();
    let mut iterations = 0;

    while iterations < max_iters {
        assign_sorted(&sorted, &centroids, &mut labels);
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in sorted.iter().zip(&labels) {
            sums[l as usize] += v;
            counts[l as usize] += 1;
        }

        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            let far = sorted
                .iter()
                .zip(&labels)
                .map(|(v, &l)| (v - centroids[l as usize]).abs())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("nonempty input");
            centroids[empty] = sorted[far];
            centroids.sort_unstable_by(f64::total_cmp);
            iterations += 1;
            continue;
        }
        inertia_trace.push(inertia(&sorted, &centroids, &labels));

        let mut movement = 0.0f64;
        for j in 0..k {
            let mean = sums[j] / counts[j] as f64;
            movement = movement.max((mean - centroids[j]).abs());
            centroids[j] = mean;
        }
        iterations += 1;
        if movement < tol {
            break;
        }
    }

    // fix the centroids at f32 precision, keeping them strictly increasing
    let mut table: Vec<f32> = centroids.iter().map(|&c| c as f32).collect();
    for j in 1..table.len() {
        if table[j] <= table[j - 1] {
            table[j] = table[j - 1].next_up();
        }
    }
    let final_centroids: Vec<f64> = table.iter().map(|&c| c as f64).collect();
    assign_sorted(&sorted, &final_centroids, &mut labels);
    inertia_trace.push(inertia(&sorted, &final_centroids, &labels));

    let mut out = vec![0u32; values.len()];
    for (&i, &l) in order.iter().zip(&labels) {
        out[i as usize] = l;
    }
    Ok(Clustering {
        model: ClusterModel::new(table)?,
        labels: out,
        iterations,
        inertia_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Optimal 1-D k-means by dynamic programming over sorted values.
    fn optimal_wcss(values: &[f64], k: usize) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mut s1 = vec![0.0; n + 1];
        let mut s2 = vec![0.0; n + 1];
        for i in 0..n {
            s1[i + 1] = s1[i] + v[i];
            s2[i + 1] = s2[i] + v[i] * v[i];
        }
        let cost = |a: usize, b: usize| {
            let cnt = (b - a) as f64;
            let s = s1[b] - s1[a];
            (s2[b] - s2[a]) - s * s / cnt
        };
        let mut dp = vec![f64::INFINITY; n + 1];
        dp[0] = 0.0;
        for _ in 0..k {
            let mut next = vec![f64::INFINITY; n + 1];
            for b in 1..=n {
                for a in 0..b {
                    if dp[a].is_finite() {
                        next[b] = next[b].min(dp[a] + cost(a, b));
                    }
                }
            }
            dp = next;
        }
        dp[n]
    }

    #[test]
    fn separable_clusters() {
        let c = kmeans_1d(&[1.0, 1.0, 1.0, 5.0, 5.0, 5.0], 2, 300, 1e-6).unwrap();
        assert_eq!(c.model.centroids(), &[1.0, 5.0]);
        assert_eq!(c.labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn saturated_k() {
        let vals = [3.0, -1.0, 2.5, 7.0, 0.0];
        let c = kmeans_1d(&vals, 5, 300, 1e-6).unwrap();
        assert_eq!(c.model.centroids(), &[-1.0, 0.0, 2.5, 3.0, 7.0]);
        assert_eq!(c.inertia(), 0.0);
        for (v, &l) in vals.iter().zip(&c.labels) {
            assert_eq!(c.model.value(l), *v);
        }
    }

    #[test]
    fn repeated_values_seed_from_distinct() {
        let vals = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let c = kmeans_1d(&vals, 3, 300, 1e-6).unwrap();
        assert_eq!(c.model.centroids(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(kmeans_1d(&[1.0], 2, 10, 1e-6), Err(Error::InvalidInput(_))));
        assert!(matches!(kmeans_1d(&[1.0, 1.0], 2, 10, 1e-6), Err(Error::InvalidInput(_))));
        assert!(matches!(kmeans_1d(&[1.0], 0, 10, 1e-6), Err(Error::InvalidParameter(_))));
        assert!(matches!(kmeans_1d(&[f32::NAN, 1.0], 1, 10, 1e-6), Err(Error::InvalidInput(_))));
    }

    fn mixture(n: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Normal::new(-2.0f64, 0.7).unwrap();
        let b = Normal::new(1.5f64, 1.0).unwrap();
        (0..n)
            .map(|i| if i % 3 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) } as f32)
            .collect()
    }

    #[test]
    fn gaussian_mixture_near_optimal() {
        let full = mixture(10_000, 4);
        let c = kmeans_1d(&full, 2, 300, 1e-6).unwrap();
        assert!(c.iterations < 300);

        let sub: Vec<f32> = full.iter().step_by(50).copied().collect();
        assert_eq!(sub.len(), 200);
        let sub64: Vec<f64> = sub.iter().map(|&v| v as f64).collect();
        for k in [2u32, 3, 5] {
            let opt = optimal_wcss(&sub64, k as usize);
            let got = kmeans_1d(&sub, k, 300, 1e-6).unwrap().inertia();
            assert!(got <= opt * 1.01 + 1e-9, "k={k}: lloyd {got} vs optimal {opt}");
        }
    }

    #[test]
    fn labels_are_nearest_and_objective_never_rises() {
        let vals = mixture(3000, 9);
        let c = kmeans_1d(&vals, 7, 300, 1e-9).unwrap();
        let cents = c.model.centroids();
        for (v, &l) in vals.iter().zip(&c.labels) {
            let d = (v - cents[l as usize]).abs();
            for (j, cj) in cents.iter().enumerate() {
                let dj = (v - cj).abs();
                assert!(d <= dj);
                if dj == d {
                    assert!(l as usize <= j);
                }
            }
        }
        for w in c.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}
