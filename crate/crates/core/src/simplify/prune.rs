use super::{PruneMask, WeightMatrix};
use crate::{Error, Result};

/// Number of entries a ratio keeps out of `total`: `ceil(ratio * total)`.
///
/// The product is nudged down by a relative 1e-12 before rounding so that
/// ratios like 0.05 that are not exact in binary do not round up by one.
pub fn kept_count(ratio: f64, total: usize) -> usize {
    let exact = ratio * total as f64;
    ((exact - exact * 1e-12).ceil() as usize).min(total)
}

/// Keeps the `ceil(ratio * len)` largest-magnitude weights.
///
/// Ties at the threshold go to the lower flattened index. Weights that are
/// exactly zero are never kept, so fewer positions survive when the matrix
/// has fewer nonzeros than requested.
pub fn prune_to_sparsity(w: &WeightMatrix, target_nnz_ratio: f64) -> Result<PruneMask> {
    if w.is_empty() {
        return Err(Error::input("cannot prune an empty matrix"));
    }
    if !(target_nnz_ratio > 0.0 && target_nnz_ratio <= 1.0) {
        return Err(Error::param(format!(
            "nonzero ratio must be in (0, 1], got {target_nnz_ratio}"
        )));
    }
    let values = w.values();
    let mut candidates: Vec<u32> = (0..values.len() as u32)
        .filter(|&i| values[i as usize] != 0.0)
        .collect();
    let keep = kept_count(target_nnz_ratio, values.len()).min(candidates.len());

    let by_magnitude = |a: &u32, b: &u32| {
        let (va, vb) = (values[*a as usize].abs(), values[*b as usize].abs());
        vb.total_cmp(&va).then(a.cmp(b))
    };
    if keep < candidates.len() && keep > 0 {
        candidates.select_nth_unstable_by(keep - 1, by_magnitude);
    }
    let mut kept = vec![false; values.len()];
    for &i in &candidates[..keep] {
        kept[i as usize] = true;
    }
    PruneMask::new(w.rows(), w.cols(), kept)
}
