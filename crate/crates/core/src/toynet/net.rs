use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::simplify::{PruneMask, WeightMatrix};
use crate::{Error, Result};

pub const DEFAULT_ARCHITECTURE: [usize; 4] = [64, 300, 100, 10];
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_BATCH: usize = 32;

/// A dense layer computing `x W + b`, with `W` of shape inputs x outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub frozen: bool,
    pub mask: Option<PruneMask>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weight_matrix(&self) -> WeightMatrix {
        let values = self.weights.iter().map(|&v| v as f32).collect();
        WeightMatrix::new(self.inputs(), self.outputs(), values).expect("shape matches")
    }

    pub fn set_weights(&mut self, w: &WeightMatrix) -> Result<()> {
        if (w.rows(), w.cols()) != (self.inputs(), self.outputs()) {
            return Err(Error::ShapeMismatch(format!(
                "layer is {}x{}, matrix is {}x{}",
                self.inputs(),
                self.outputs(),
                w.rows(),
                w.cols()
            )));
        }
        for (dst, &src) in self.weights.iter_mut().zip(w.values()) {
            *dst = src as f64;
        }
        Ok(())
    }

    /// Zeroes every weight the mask drops.
    pub fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            for (v, &k) in self.weights.iter_mut().zip(mask.kept()) {
                if !k {
                    *v = 0.0;
                }
            }
        }
    }
}

/// A ReLU multilayer perceptron with a softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients of the mean cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl ToyNet {
    /// He-initialized weights, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::param("a network needs at least two positive layer widths"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
                Layer {
                    weights: Array2::from_shape_fn((w[0], w[1]), |_| normal.sample(&mut rng)),
                    bias: Array1::zeros(w[1]),
                    frozen: false,
                    mask: None,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("nonempty").outputs()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "network takes {} inputs, data has {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        self.check_input(&x)?;
        let logits = self.forward(x).pop().expect("output layer");
        Ok(logits
            .axis_iter(Axis(0))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(y).filter(|(p, t)| p == t).count();
        Ok(hits as f64 / y.len().max(1) as f64)
    }

    pub fn test_accuracy(&self, data: &Dataset) -> Result<f64> {
        self.accuracy(data.test_x.view(), &data.test_y)
    }

    /// Mean cross-entropy over the batch and its gradients by backpropagation.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<(f64, Gradients)> {
        self.check_input(&x)?;
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::ShapeMismatch("batch inputs and labels differ in length".into()));
        }
        if y.iter().any(|&c| c >= self.classes()) {
            return Err(Error::input("label outside the network's classes"));
        }
        let acts = self.forward(x);
        let n = y.len() as f64;
        let logits = acts.last().expect("output layer");

        let mut delta = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            loss += sum.ln() + max - row[y[i]];
            for (j, &v) in row.iter().enumerate() {
                delta[[i, j]] = (v - max).exp() / sum / n;
            }
            delta[[i, y[i]]] -= 1.0 / n;
        }

        let depth = self.layers.len();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for l in (0..depth).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((loss / n, Gradients { weights: gw, bias: gb }))
    }

    /// Mean cross-entropy over a whole set.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        Ok(self.loss_and_gradients(x, y)?.0)
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            if layer.frozen {
                continue;
            }
            layer.weights.scaled_add(-lr, &g.weights[l]);
            layer.bias.scaled_add(-lr, &g.bias[l]);
            layer.apply_mask();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            batch: DEFAULT_BATCH,
            seed: 0,
        }
    }
}

/// Minibatch SGD on the training split; returns the training loss after each epoch.
///
/// Frozen layers are never updated and pruned weights stay exactly zero.
/// Batch order is shuffled per epoch from `seed` and the epoch number.
pub fn train(net: &mut ToyNet, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    net.check_input(&data.train_x.view())?;
    if data.classes > net.classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} classes but {} outputs",
            data.classes,
            net.classes()
        )));
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::param("batch size and learning rate must be positive"));
    }
    for layer in &mut net.layers {
        layer.apply_mask();
    }
    let n = data.train_y.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let x = data.train_x.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.train_y[i]).collect();
            let (_, g) = net.loss_and_gradients(x.view(), &y)?;
            net.step(&g, cfg.lr);
        }
        losses.push(net.loss(data.train_x.view(), &data.train_y)?);
    }
    Ok(losses)
}
