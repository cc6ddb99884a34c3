//! A small dense classifier for exercising the freeze-and-retrain loop.
//!
//! Layers are trained in `f64`. A layer that has been encoded is installed
//! with its reconstructed weights, false positives included, and frozen;
//! only the layers after it keep training.

mod data;
mod net;
mod pipeline;

pub use data::{
    make_synthetic_dataset, make_synthetic_dataset_with, read_idx_images, read_idx_labels, Dataset,
    DEFAULT_SEPARATION, DEFAULT_TRAIN_FRACTION,
};
pub use net::{
    train, Gradients, Layer, ToyNet, TrainConfig, DEFAULT_ARCHITECTURE, DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR,
};
pub use pipeline::{weightless_pipeline, LayerSpec, PipelineOutcome, Stage, TraceRow};

/// Default simplification of the first hidden layer: 10% kept, 8 clusters,
/// and `t = ceil(log2 k) + 1` so false positives are common.
pub const DEFAULT_LAYER_SPEC: LayerSpec = LayerSpec {
    nnz_ratio: 0.1,
    k: 8,
    t: 4,
};

/// Default synthetic task: 10 classes, 64 dimensions, 10,000 samples.
pub fn default_dataset(seed: u64) -> crate::Result<Dataset> {
    make_synthetic_dataset(seed, 10, 64, 10_000)
}

/// Default network trained for the default number of epochs.
pub fn trained_reference(data: &Dataset, seed: u64) -> crate::Result<ToyNet> {
    let mut net = ToyNet::new(&DEFAULT_ARCHITECTURE, seed)?;
    train(&mut net, data, &TrainConfig { seed, ..Default::default() })?;
    Ok(net)
}
