//! County-level spatiotemporal forecasting and ensemble consensus.
//!
//! The crate is organized as the pipeline runs:
//!
//! - [`ingest`] loads daily county series, normalizes clinical counts per
//!   100k residents and aligns everything into a dense [`FeaturePanel`].
//! - [`graphs`] builds the border-adjacency and socioeconomic-similarity
//!   county networks and their degree centrality.
//! - [`ndiff`] is a small reverse-mode differentiation tape used by every model.
//! - [`models`] holds the recurrent graph convolution, the LSTM baseline and
//!   the ensemble roster.
//! - [`train`] windows the panel, optimizes with AMSGrad and runs the paired
//!   baseline / with-factor experiment sweep.
//! - [`consensus`] turns paired per-county RMSEs into one-tailed tests and
//!   per-county vote counts.
//! - [`viz_stats`] computes the quantile bins, histograms and trend lines the
//!   exploration UI renders.
//! - [`synth`] generates planted-signal states and [`pipeline`] wires the
//!   stages together over an output directory.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

pub mod consensus;
pub mod error;
pub mod graphs;
pub mod ingest;
pub mod models;
pub mod ndiff;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod viz_stats;

pub use error::{Error, Result};
pub use graphs::{CountyGraph, GraphKind};
pub use ingest::{CountySeries, FeaturePanel};
pub use scalar::Scalar;

pub type Tensor64 = ndiff::Tensor<f64>;
pub type Tensor32 = ndiff::Tensor<f32>;
pub type Tape64 = ndiff::Tape<f64>;
pub type Tape32 = ndiff::Tape<f32>;
pub type RgcParams64 = models::RgcParams<f64>;
pub type RgcParams32 = models::RgcParams<f32>;
pub type LstmParams64 = models::LstmParams<f64>;
pub type ModelParams64 = models::ModelParams<f64>;
pub type ModelParams32 = models::ModelParams<f32>;
pub type OptimizerState64 = train::OptimizerState<f64>;
