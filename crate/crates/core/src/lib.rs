//! Top-push distance learning (TDL) for video-based person re-identification.
//!
//! The crate learns a Mahalanobis metric `M` that pulls same-identity videos
//! together while pushing each sample's nearest differently-labelled
//! neighbour beyond a margin, and ships everything needed to run it end to
//! end:
//!
//! * [`metric`]: feature vectors, the PSD [`MetricMatrix`], distances and the
//!   `TDLM` metric file.
//! * [`optimizer`]: objective, triggered set, subgradient, PSD projection and
//!   the projected-descent training loop.
//! * [`features`]: the 2905-dimensional per-video descriptor (pooled
//!   colour/LBP patch statistics plus a space-time gradient histogram).
//! * [`dataset`]: directory scanning, the `TDLF` feature store, synthetic
//!   data and preprocessing.
//! * [`eval`]: single-shot splits, ranking, CMC curves and benchmarks.
//! * [`cli`]: the `tdl` command-line driver.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod metric;
pub mod optimizer;

pub use nalgebra;

pub use error::{Error, Result};
pub use metric::{FeatureVector, LabeledSample, MetricMatrix, Triplet};
pub use optimizer::{train, TrainConfig, TrainReport};
