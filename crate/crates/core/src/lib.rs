//! Rank-consistency multi-label hashing.
//!
//! Learns K-bit binary codes from precomputed feature vectors by minimizing a
//! rank-consistency loss over hamming-distance intervals together with a
//! multi-label softmax classification loss, a multi-label center (clustering)
//! loss and a quantization penalty. Gradients are analytic; training is plain
//! minibatch SGD over a small hashing head. Learned codes are served by an
//! exact linear-scan hamming index and scored with NDCG@p / ACG@p.
//!
//! Module map:
//!
//! - [`dataset`]: multi-label feature sets, the `RCHD` file format, synthetic generator
//! - [`rankstruct`]: per-anchor common-label partitions and hamming intervals
//! - [`objective`]: the four loss terms and their gradients, center updates
//! - [`trainer`]: hashing head, SGD loop, `RCCK` checkpoints, ablation presets
//! - [`retrieval`]: packed codes, hamming distance, `RCBC` files, top-k queries
//! - [`metrics`]: relevance lists, NDCG@p, ACG@p, evaluation harness
//! - [`gradcheck`]: finite-difference verification of every analytic gradient
//! - [`cli`]: run configuration and the `rcdh` subcommands

pub mod cli;
pub mod dataset;
mod error;
pub mod gradcheck;
mod io;
pub mod metrics;
pub mod objective;
pub mod rankstruct;
pub mod retrieval;
pub mod trainer;

pub use error::{Error, Result};
