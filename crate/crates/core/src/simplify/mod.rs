//! Pruning and clustering: the lossy steps that precede filter encoding.

mod kmeans;
pub(crate) mod prune;

pub use kmeans::{kmeans_1d, Clustering, DEFAULT_MAX_ITERS, DEFAULT_TOL};
pub use prune::{kept_count, prune_to_sparsity};

use crate::{Error, Result};

/// Dense row-major matrix of 32-bit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(values.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Which positions of a matrix survive pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    rows: usize,
    cols: usize,
    kept: Vec<bool>,
}

impl PruneMask {
    pub fn new(rows: usize, cols: usize, kept: Vec<bool>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(kept.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} mask needs {} entries, got {}",
                rows.saturating_mul(cols),
                kept.len()
            )));
        }
        Ok(Self { rows, cols, kept })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn is_kept(&self, index: usize) -> bool {
        self.kept[index]
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    /// Flattened indices of kept positions, ascending.
    pub fn positions(&self) -> Vec<u64> {
        self.kept
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i as u64))
            .collect()
    }

    /// Zeroes every dropped position of `w` in place.
    pub fn apply(&self, w: &mut WeightMatrix) -> Result<()> {
        self.check_shape(w)?;
        for (v, &k) in w.values.iter_mut().zip(&self.kept) {
            if !k {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn check_shape(&self, w: &WeightMatrix) -> Result<()> {
        if (self.rows, self.cols) != (w.rows, w.cols) {
            return Err(Error::ShapeMismatch(format!(
                "mask is {}x{}, matrix is {}x{}",
                self.rows, self.cols, w.rows, w.cols
            )));
        }
        Ok(())
    }
}

/// Sorted, distinct centroid table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centroids: Vec<f32>,
}

impl ClusterModel {
    pub fn new(centroids: Vec<f32>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::input("centroid table is empty"));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("centroid table contains a non-finite value"));
        }
        if centroids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("centroids must be strictly increasing"));
        }
        if centroids.len() > u16::MAX as usize {
            return Err(Error::input(format!("{} centroids exceed the 16-bit count", centroids.len())));
        }
        Ok(Self { centroids })
    }

    pub fn k(&self) -> u32 {
        self.centroids.len() as u32
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn value(&self, label: u32) -> f32 {
        self.centroids[label as usize]
    }

    /// Index of the centroid exactly equal to `value`.
    pub fn label_of(&self, value: f32) -> Option<u32> {
        self.centroids
            .binary_search_by(|c| c.total_cmp(&value))
            .ok()
            .map(|i| i as u32)
    }
}

/// A pruned, clustered layer: retained positions and their cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedLayer {
    rows: usize,
    cols: usize,
    positions: Vec<u64>,
    labels: Vec<u32>,
    model: ClusterModel,
}

impl SimplifiedLayer {
    pub fn new(
        rows: usize,
        cols: usize,
        positions: Vec<u64>,
        labels: Vec<u32>,
        model: ClusterModel,
    ) -> Result<Self> {
        if positions.len() != labels.len() {
            return Err(Error::input(format!(
                "{} positions but {} labels",
                positions.len(),
                labels.len()
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("positions must be strictly increasing"));
        }
        let size = (rows as u64).saturating_mul(cols as u64);
        if positions.last().is_some_and(|&p| p >= size) {
            return Err(Error::input(format!("position outside the {rows}x{cols} shape")));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= model.k()) {
            return Err(Error::input(format!("label {l} is not below k = {}", model.k())));
        }
        Ok(Self {
            rows,
            cols,
            positions,
            labels,
            model,
        })
    }

    /// Recovers a layer from a dense matrix whose nonzeros are all centroid values.
    pub fn from_dense(w: &WeightMatrix, model: ClusterModel) -> Result<Self> {
        let mut positions = Vec::new();
        let mut labels = Vec::new();
        for (i, &v) in w.values().iter().enumerate() {
            if v != 0.0 {
                let label = model
                    .label_of(v)
                    .ok_or_else(|| Error::input(format!("value {v} at {i} is not a centroid")))?;
                positions.push(i as u64);
                labels.push(label);
            }
        }
        Self::new(w.rows(), w.cols(), positions, labels, model)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn k(&self) -> u32 {
        self.model.k()
    }

    pub fn nnz(&self) -> usize {
        self.positions.len()
    }

    pub fn size(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    /// The simplified matrix: centroid values at retained positions, zero elsewhere.
    pub fn to_dense(&self) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(self.rows, self.cols);
        for (&p, &l) in self.positions.iter().zip(&self.labels) {
            w.values[p as usize] = self.model.value(l);
        }
        w
    }
}

/// Clusters the weights retained by `mask` into `k` centroids.
pub fn simplify_layer(w: &WeightMatrix, mask: &PruneMask, k: u32) -> Result<SimplifiedLayer> {
    mask.check_shape(w)?;
    let positions = mask.positions();
    if (positions.len() as u64) < k as u64 {
        return Err(Error::input(format!(
            "{} retained weights cannot form {k} clusters",
            positions.len()
        )));
    }
    let values: Vec<f32> = positions.iter().map(|&p| w.values[p as usize]).collect();
    let clustering = kmeans_1d(&values, k, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
    SimplifiedLayer::new(w.rows, w.cols, positions, clustering.labels, clustering.model)
}
