//! Dashcam driver-behavior evaluation and coaching pipeline.
//!
//! - [`media`]: manifest loading, frame sampling, side-by-side compositing
//! - [`catalog`]: instruction templates and per-clip expansion
//! - [`parser`]: cleanup and classification of raw model responses
//! - [`metrics`]: accuracy rate, corpus BLEU, BERTScore
//! - [`gateway`]: HTTP client for the inference and embedding endpoints
//! - [`coaching`]: event detection, coaching database alignment, reports
//! - [`harness`]: the `ingest`, `evaluate` and `coach` commands

pub mod catalog;
pub mod coaching;
pub mod gateway;
pub mod harness;
pub mod media;
pub mod metrics;
pub mod parser;
mod scalar;

pub use scalar::Scalar;

pub type EmbeddingMatrix = metrics::EmbeddingMatrix<f64>;
pub type ArResult = metrics::ArResult<f64>;
pub type BleuResult = metrics::BleuResult<f64>;
pub type BertScoreResult = metrics::BertScoreResult<f64>;
