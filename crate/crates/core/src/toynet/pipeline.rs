use std::fmt::Write as _;

use super::{train, Dataset, ToyNet, TrainConfig};
use crate::container::{encode_layer, reconstruct, EncodeParams, EncodedLayer};
use crate::simplify::{prune_to_sparsity, simplify_layer};
use crate::{Error, Result};

/// Simplification and encoding settings for one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub nnz_ratio: f64,
    pub k: u32,
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Prune,
    Retrain,
    Cluster,
    Encode,
    RetrainSubsequent,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Prune => "prune",
            Stage::Retrain => "retrain",
            Stage::Cluster => "cluster",
            Stage::Encode => "encode",
            Stage::RetrainSubsequent => "retrain_subsequent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub stage: Stage,
    pub layer: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub net: ToyNet,
    pub encoded: Vec<EncodedLayer>,
    /// Test accuracy before any simplification.
    pub initial_accuracy: f64,
    pub trace: Vec<TraceRow>,
}

impl PipelineOutcome {
    pub fn accuracy_at(&self, stage: Stage, layer: usize) -> Option<f64> {
        self.trace
            .iter()
            .find(|r| r.stage == stage && r.layer == layer)
            .map(|r| r.accuracy)
    }

    /// `stage,layer,accuracy` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("stage,layer,accuracy\n");
        for r in &self.trace {
            writeln!(out, "{},{},{:.6}", r.stage.as_str(), r.layer, r.accuracy).expect("write to string");
        }
        out
    }
}

/// Simplifies and encodes `specs.len()` layers front to back.
///
/// For each layer: prune, retrain with the mask, cluster, encode, install the
/// reconstructed matrix (false positives included) and freeze it, then
/// retrain only the layers after it. `seed` drives both filter hashing and
/// batch order.
pub fn weightless_pipeline(
    mut net: ToyNet,
    data: &Dataset,
    specs: &[LayerSpec],
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<PipelineOutcome> {
    if specs.len() > net.layers.len() {
        return Err(Error::param(format!(
            "{} layer specs for a {}-layer network",
            specs.len(),
            net.layers.len()
        )));
    }
    let initial_accuracy = net.test_accuracy(data)?;
    let mut trace = Vec::new();
    let mut encoded = Vec::new();
    for (l, spec) in specs.iter().enumerate() {
        let cfg = TrainConfig {
            seed: train_cfg.seed.wrapping_add(l as u64 * 2),
            ..*train_cfg
        };
        let mut record = |stage, net: &ToyNet| -> Result<()> {
            trace.push(TraceRow {
                stage,
                layer: l,
                accuracy: net.test_accuracy(data)?,
            });
            Ok(())
        };

        let w = net.layers[l].weight_matrix();
        let mask = prune_to_sparsity(&w, spec.nnz_ratio)?;
        net.layers[l].mask = Some(mask);
        net.layers[l].apply_mask();
        record(Stage::Prune, &net)?;

        train(&mut net, data, &cfg)?;
        record(Stage::Retrain, &net)?;

        let mask = net.layers[l].mask.take().expect("mask installed");
        let simplified = simplify_layer(&net.layers[l].weight_matrix(), &mask, spec.k)?;
        net.layers[l].set_weights(&simplified.to_dense())?;
        record(Stage::Cluster, &net)?;

        let mut enc = encode_layer(&simplified, &EncodeParams::new(spec.t, seed.wrapping_add(l as u64)))?;
        enc.set_name(format!("layer{l}"));
        net.layers[l].set_weights(&reconstruct(&enc))?;
        net.layers[l].frozen = true;
        encoded.push(enc);
        record(Stage::Encode, &net)?;

        // earlier layers are already frozen, so this trains the later ones
        train(&mut net, data, &TrainConfig { seed: cfg.seed + 1, ..cfg })?;
        record(Stage::RetrainSubsequent, &net)?;
    }
    Ok(PipelineOutcome {
        net,
        encoded,
        initial_accuracy,
        trace,
    })
}
