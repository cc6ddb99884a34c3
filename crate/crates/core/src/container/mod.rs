//! Layer encoding, reconstruction, size accounting and experiments.
//!
//! A layer's positions are split across `num_shards` filters by
//! `key mod num_shards`. Shard `i` starts from seed `seed_base + i` and, if
//! peeling fails, moves on to the next seed; the container records how many
//! seeds each shard skipped.

pub mod format;

use std::thread;

use crate::baseline::{best_index_bits, csr_huffman_bits, csr_size_bits, CsrLayer, CENTROID_BITS};
use crate::bloomier::{construct, BloomierFilter, FilterParams, KeyValueSet, DEFAULT_MAX_RETRIES, DEFAULT_TABLE_MULTIPLIER};
use crate::entropy::pack_cells_coded;
use crate::simplify::{prune_to_sparsity, simplify_layer, ClusterModel, SimplifiedLayer, WeightMatrix};
use crate::synth;
use crate::{Error, Result};

pub use format::{
    pack, parse_csv, read_wmat, unpack, write_wmat, Codec, LayerRecord, EMPTY_CONTAINER_LEN,
};

pub const MAX_SHARD_RETRIES: u32 = u8::MAX as u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeParams {
    pub t: u32,
    pub c: f64,
    pub num_shards: usize,
    pub seed: u64,
    /// Per-shard retries with the next seed, at most 255.
    pub max_retries: u32,
    /// Worker threads for shard construction and probing.
    pub jobs: usize,
}

impl EncodeParams {
    pub fn new(t: u32, seed: u64) -> Self {
        Self {
            t,
            c: DEFAULT_TABLE_MULTIPLIER,
            num_shards: 1,
            seed,
            max_retries: DEFAULT_MAX_RETRIES,
            jobs: 1,
        }
    }

    pub fn with_shards(mut self, num_shards: usize) -> Self {
        self.num_shards = num_shards;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }
}

/// A layer stored as sharded Bloomier filters plus its centroid table.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedLayer {
    name: String,
    rows: usize,
    cols: usize,
    seed_base: u64,
    shards: Vec<BloomierFilter>,
    model: ClusterModel,
}

impl EncodedLayer {
    /// Reassembles a layer; shard `i` must carry a seed in
    /// `seed_base + i ..= seed_base + i + 255`.
    pub fn from_parts(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        seed_base: u64,
        shards: Vec<BloomierFilter>,
        model: ClusterModel,
    ) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::input("an encoded layer needs at least one shard"));
        }
        let (k, t) = (shards[0].k(), shards[0].t());
        if k != model.k() {
            return Err(Error::input(format!("shards store k = {k} but the table has {}", model.k())));
        }
        for (i, s) in shards.iter().enumerate() {
            if s.k() != k || s.t() != t {
                return Err(Error::input(format!("shard {i} has k = {}, t = {}", s.k(), s.t())));
            }
            if s.seed().wrapping_sub(seed_base.wrapping_add(i as u64)) > MAX_SHARD_RETRIES as u64 {
                return Err(Error::input(format!("shard {i} seed does not follow the base seed")));
            }
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            seed_base,
            shards,
            model,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn size(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    pub fn k(&self) -> u32 {
        self.model.k()
    }

    pub fn t(&self) -> u32 {
        self.shards[0].t()
    }

    pub fn seed_base(&self) -> u64 {
        self.seed_base
    }

    /// Seeds shard `i` skipped before peeling succeeded.
    pub fn shard_retries(&self, i: usize) -> u8 {
        self.shards[i].seed().wrapping_sub(self.seed_base.wrapping_add(i as u64)) as u8
    }

    pub fn shards(&self) -> &[BloomierFilter] {
        &self.shards
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn nnz(&self) -> usize {
        self.shards.iter().map(|s| s.n()).sum()
    }

    /// Cluster index at a flattened position, or `None` for zero.
    #[inline]
    pub fn query(&self, position: u64) -> Option<u32> {
        self.shards[(position % self.shards.len() as u64) as usize].query(position)
    }

    /// `sum over shards of m * t`.
    pub fn filter_bits(&self) -> u64 {
        self.shards.iter().map(|s| s.payload_bits()).sum()
    }

    pub fn centroid_bits(&self) -> u64 {
        CENTROID_BITS * self.k() as u64
    }

    /// Container bytes describing the layer besides its name, centroids and
    /// payloads: shape, k, t, shard count, base seed and codec, plus n, m,
    /// retry count and payload length per shard.
    pub fn metadata_bits(&self) -> u64 {
        8 * (format::LAYER_FIXED_BYTES + format::SHARD_FIXED_BYTES * self.shards.len()) as u64
    }
}

/// Splits `(position, label)` pairs into `num_shards` sets by `position mod num_shards`.
pub fn shard_keys(positions: &[u64], labels: &[u32], k: u32, num_shards: usize) -> Result<Vec<KeyValueSet>> {
    if num_shards == 0 {
        return Err(Error::param("shard count must be at least 1"));
    }
    if positions.len() != labels.len() {
        return Err(Error::input("positions and labels differ in length"));
    }
    let mut parts: Vec<Vec<(u64, u32)>> = vec![Vec::with_capacity(positions.len() / num_shards + 1); num_shards];
    for (&p, &l) in positions.iter().zip(labels) {
        parts[(p % num_shards as u64) as usize].push((p, l));
    }
    parts.into_iter().map(|entries| KeyValueSet::new(entries, k)).collect()
}

/// Applies `f` to every item on up to `jobs` scoped threads, preserving order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

pub fn encode_layer(layer: &SimplifiedLayer, params: &EncodeParams) -> Result<EncodedLayer> {
    if layer.nnz() == 0 {
        return Err(Error::input("cannot encode a layer with no retained weights"));
    }
    if params.num_shards == 0 || params.num_shards > u8::MAX as usize {
        return Err(Error::param(format!("shard count must be in 1..=255, got {}", params.num_shards)));
    }
    if params.max_retries > MAX_SHARD_RETRIES {
        return Err(Error::param(format!("at most {MAX_SHARD_RETRIES} retries per shard")));
    }
    let sets = shard_keys(layer.positions(), layer.labels(), layer.k(), params.num_shards)?;
    let indexed: Vec<(usize, &KeyValueSet)> = sets.iter().enumerate().collect();
    let shards = parallel_map(&indexed, params.jobs, |&(i, set)| {
        let fp = FilterParams {
            t: params.t,
            c: params.c,
            seed: params.seed.wrapping_add(i as u64),
            max_retries: params.max_retries,
        };
        construct(set, &fp)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    EncodedLayer::from_parts("", layer.rows(), layer.cols(), params.seed, shards, layer.model().clone())
}

/// Queries every position: `None` becomes 0.0, label `v` becomes centroid `v`.
pub fn reconstruct(enc: &EncodedLayer) -> WeightMatrix {
    reconstruct_with(enc, 1)
}

pub fn reconstruct_with(enc: &EncodedLayer, jobs: usize) -> WeightMatrix {
    let rows: Vec<usize> = (0..enc.rows).collect();
    let values: Vec<f32> = parallel_map(&rows, jobs, |&r| {
        let start = (r * enc.cols) as u64;
        (start..start + enc.cols as u64)
            .map(|p| enc.query(p).map_or(0.0, |v| enc.model.value(v)))
            .collect::<Vec<f32>>()
    })
    .concat();
    WeightMatrix::new(enc.rows, enc.cols, values).expect("shape matches")
}

/// Number of positions outside `positions` (sorted) that decode to a nonzero.
pub fn count_false_positives(enc: &EncodedLayer, positions: &[u64], jobs: usize) -> u64 {
    const BLOCK: u64 = 1 << 20;
    let blocks: Vec<u64> = (0..enc.size().div_ceil(BLOCK)).collect();
    parallel_map(&blocks, jobs, |&b| {
        let (lo, hi) = (b * BLOCK, ((b + 1) * BLOCK).min(enc.size()));
        let mut next = positions.partition_point(|&p| p < lo);
        let mut count = 0u64;
        for p in lo..hi {
            if positions.get(next) == Some(&p) {
                next += 1;
            } else if enc.query(p).is_some() {
                count += 1;
            }
        }
        count
    })
    .into_iter()
    .sum()
}

/// Size accounting for one layer, in bits unless noted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeReport {
    /// 32 bits per weight of the dense matrix.
    pub original_bits: u64,
    pub simplified_nnz: u64,
    /// `sum m * t` over shards.
    pub filter_bits: u64,
    pub centroid_bits: u64,
    pub metadata_bits: u64,
    /// Arithmetic-coded shard tables.
    pub packed_bits: u64,
    pub csr_bits: u64,
    pub csr_huffman_bits: u64,
    /// `original / (filter + centroids + metadata)`.
    pub compression_factor: f64,
    /// `original / (packed + centroids + metadata)`.
    pub packed_compression_factor: f64,
    pub csr_compression_factor: f64,
    pub csr_huffman_compression_factor: f64,
}

impl SizeReport {
    pub fn filter_kb(&self) -> f64 {
        self.filter_bits as f64 / 8.0 / 1024.0
    }

    pub fn packed_kb(&self) -> f64 {
        self.packed_bits as f64 / 8.0 / 1024.0
    }
}

pub fn packed_bits(enc: &EncodedLayer) -> Result<u64> {
    enc.shards
        .iter()
        .map(|s| pack_cells_coded(s.cells(), s.t()).map(|b| 8 * b.len() as u64))
        .sum()
}

pub fn size_report(layer: &SimplifiedLayer, enc: &EncodedLayer, csr: &CsrLayer) -> Result<SizeReport> {
    let original_bits = 32 * layer.size();
    let filter_bits = enc.filter_bits();
    let packed = packed_bits(enc)?;
    let csr_bits = csr_size_bits(csr);
    let csr_huffman = csr_huffman_bits(csr)?;
    let extra = enc.centroid_bits() + enc.metadata_bits();
    let ratio = |bits: u64| original_bits as f64 / bits as f64;
    Ok(SizeReport {
        original_bits,
        simplified_nnz: layer.nnz() as u64,
        filter_bits,
        centroid_bits: enc.centroid_bits(),
        metadata_bits: enc.metadata_bits(),
        packed_bits: packed,
        csr_bits,
        csr_huffman_bits: csr_huffman,
        compression_factor: ratio(filter_bits + extra),
        packed_compression_factor: ratio(packed + extra),
        csr_compression_factor: ratio(csr_bits),
        csr_huffman_compression_factor: ratio(csr_huffman),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub t: u32,
    pub fp_count: u64,
    pub filter_bits: u64,
    pub packed_bits: u64,
}

/// Encodes the layer once per `t` with the same seed and counts false positives.
pub fn sweep_t(layer: &SimplifiedLayer, ts: impl IntoIterator<Item = u32>, params: &EncodeParams) -> Result<Vec<SweepPoint>> {
    ts.into_iter()
        .map(|t| {
            let enc = encode_layer(layer, &EncodeParams { t, ..*params })?;
            Ok(SweepPoint {
                t,
                fp_count: count_false_positives(&enc, layer.positions(), params.jobs),
                filter_bits: enc.filter_bits(),
                packed_bits: packed_bits(&enc)?,
            })
        })
        .collect()
}

/// How the scaling experiment picks `t` for a given `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TPolicy {
    Fixed(u32),
    /// `ceil(log2 k) + extra`.
    AboveLog2K(u32),
}

impl TPolicy {
    pub fn resolve(self, k: u32) -> u32 {
        match self {
            TPolicy::Fixed(t) => t,
            TPolicy::AboveLog2K(extra) => (32 - (k.max(1) - 1).leading_zeros()) + extra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub nnz_ratio: f64,
    pub nnz: u64,
    pub t: u32,
    pub filter_bits: u64,
    /// Packed tables plus centroids and metadata.
    pub weightless_packed_bits: u64,
    pub csr_index_bits: u32,
    pub csr_huffman_bits: u64,
}

/// For each ratio: prune a seeded Gaussian matrix, cluster, then size both
/// the packed filter encoding and the best Huffman-coded CSR encoding.
pub fn sparsity_scaling_experiment(
    rows: usize,
    cols: usize,
    nnz_ratios: &[f64],
    k: u32,
    policy: TPolicy,
    params: &EncodeParams,
) -> Result<Vec<ScalingPoint>> {
    let w = synth::gaussian_matrix(rows, cols, 0.05, params.seed);
    nnz_ratios
        .iter()
        .map(|&ratio| {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::param(format!("nonzero ratio must be in (0, 1), got {ratio}")));
            }
            let mask = prune_to_sparsity(&w, ratio)?;
            let layer = simplify_layer(&w, &mask, k)?;
            let t = policy.resolve(k);
            let enc = encode_layer(&layer, &EncodeParams { t, ..*params })?;
            let csr = best_index_bits(&layer)?;
            Ok(ScalingPoint {
                nnz_ratio: ratio,
                nnz: layer.nnz() as u64,
                t,
                filter_bits: enc.filter_bits(),
                weightless_packed_bits: packed_bits(&enc)? + enc.centroid_bits() + enc.metadata_bits(),
                csr_index_bits: csr.index_bits,
                csr_huffman_bits: csr.csr_huffman_bits,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
