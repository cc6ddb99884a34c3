use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Spread of the per-class means, in units of the within-class standard deviation.
pub const DEFAULT_SEPARATION: f64 = 0.5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn new(
        train_x: Array2<f64>,
        train_y: Vec<usize>,
        test_x: Array2<f64>,
        test_y: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        if train_x.nrows() != train_y.len() || test_x.nrows() != test_y.len() {
            return Err(Error::ShapeMismatch("inputs and labels differ in length".into()));
        }
        if train_x.ncols() != test_x.ncols() {
            return Err(Error::ShapeMismatch("train and test inputs differ in width".into()));
        }
        if train_y.iter().chain(&test_y).any(|&y| y >= classes) {
            return Err(Error::input(format!("label outside {classes} classes")));
        }
        Ok(Self {
            train_x,
            train_y,
            test_x,
            test_y,
            classes,
        })
    }
}

/// Gaussian class clusters with the default separation and an 80/20 split.
pub fn make_synthetic_dataset(seed: u64, classes: usize, dim: usize, n: usize) -> Result<Dataset> {
    make_synthetic_dataset_with(seed, classes, dim, n, DEFAULT_SEPARATION)
}

/// Class `c` has mean `mu_c ~ N(0, separation^2 I)`; samples are `mu_c + N(0, I)`.
/// Labels cycle through the classes before shuffling, so classes are balanced.
pub fn make_synthetic_dataset_with(
    seed: u64,
    classes: usize,
    dim: usize,
    n: usize,
    separation: f64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::param("a dataset needs at least two classes"));
    }
    if dim == 0 || n < 2 {
        return Err(Error::param("dataset needs a positive dimension and at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, separation).map_err(|e| Error::param(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let means = Array2::from_shape_fn((classes, dim), |_| spread.sample(&mut rng));

    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut x = Array2::zeros((n, dim));
    for (mut row, &y) in x.axis_iter_mut(Axis(0)).zip(&labels) {
        for (v, &mu) in row.iter_mut().zip(means.row(y)) {
            *v = mu + unit.sample(&mut rng);
        }
    }
    let n_train = ((n as f64 * DEFAULT_TRAIN_FRACTION).round() as usize).clamp(1, n - 1);
    Dataset::new(
        x.slice(ndarray::s![..n_train, ..]).to_owned(),
        labels[..n_train].to_vec(),
        x.slice(ndarray::s![n_train.., ..]).to_owned(),
        labels[n_train..].to_vec(),
        classes,
    )
}

fn idx_header(bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, &[u8])> {
    let head = 4 + 4 * dims;
    if bytes.len() < head {
        return Err(Error::CorruptFile("IDX header truncated".into()));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("four bytes"));
    if word(0) != magic {
        return Err(Error::CorruptFile(format!("IDX magic {:#x}, expected {magic:#x}", word(0))));
    }
    let shape: Vec<usize> = (1..=dims).map(|i| word(i) as usize).collect();
    let body = &bytes[head..];
    if body.len() != shape.iter().product::<usize>() {
        return Err(Error::CorruptFile("IDX payload length does not match its header".into()));
    }
    Ok((shape, body))
}

/// Unsigned-byte image file (magic 0x803), flattened and scaled to `[0, 1]`.
pub fn read_idx_images(bytes: &[u8]) -> Result<Array2<f64>> {
    let (shape, body) = idx_header(bytes, 0x0803, 3)?;
    let pixels = shape[1] * shape[2];
    let values: Array1<f64> = body.iter().map(|&b| b as f64 / 255.0).collect();
    values
        .into_shape_with_order((shape[0], pixels))
        .map_err(|e| Error::CorruptFile(e.to_string()))
}

/// Unsigned-byte label file (magic 0x801).
pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, body) = idx_header(bytes, 0x0801, 1)?;
    Ok(body.iter().map(|&b| b as usize).collect())
}
