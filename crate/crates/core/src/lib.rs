//! Unsupervised anomalous sound detection for machine condition monitoring.
//!
//! The pipeline turns mono 16 kHz clips into stacked log-mel vectors
//! ([`dsp`]), trains a dense autoencoder on normal data only ([`model`]),
//! scores clips by reconstruction error or by a per-frame minimum of
//! source/target Mahalanobis forms ([`scoring`]), and evaluates with
//! per-domain AUC, low-FPR pAUC and their harmonic mean ([`metrics`]).
//! [`dataset`] models the on-disk layout and can synthesize small datasets
//! with the same structure.

pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod scoring;

pub use error::{Error, Result};
