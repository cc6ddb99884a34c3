//! Lossy compression of sparse, clustered weight matrices with Bloomier filters.
//!
//! The pipeline has four stages:
//!
//! 1. [`simplify`]: magnitude pruning and scalar k-means turn a dense
//!    [`WeightMatrix`] into a [`SimplifiedLayer`] of (position, cluster index) pairs.
//! 2. [`bloomier`]: the positions are hashed into one or more Bloomier filters
//!    that return the cluster index for every stored position and, for other
//!    positions, `None` except for a controlled fraction of false positives.
//! 3. [`entropy`]: filter tables are range coded for transmission.
//! 4. [`container`]: shards, reconstruction, size accounting, experiments and
//!    the on-disk formats.
//!
//! [`baseline`] implements the compressed-sparse-row encoding used for
//! comparison and [`toynet`] is a small dense classifier used to exercise the
//! freeze-and-retrain loop.

pub mod baseline;
pub mod bloomier;
pub mod container;
pub mod entropy;
mod error;
pub mod simplify;
pub mod synth;
pub mod toynet;

pub use baseline::CsrLayer;
pub use bloomier::{BloomierFilter, FilterParams, KeyValueSet};
pub use container::{EncodeParams, EncodedLayer, SizeReport};
pub use entropy::{Bitstream, SymbolHistogram};
pub use error::{Error, Result};
pub use simplify::{ClusterModel, PruneMask, SimplifiedLayer, WeightMatrix};
