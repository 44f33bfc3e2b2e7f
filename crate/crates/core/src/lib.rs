//! Dynamic modularity-spectral clustering of equity correlation networks.
//!
//! The pipeline cleans rolling correlation matrices with random matrix
//! theory, thresholds them into graphs, detects communities with a
//! sector-seeded Leiden optimiser, regroups small communities spectrally, and
//! builds cluster-aware equal-weight portfolios.

pub mod community;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod numerics;
pub mod partition;
pub mod pipeline;
pub mod portfolio;
pub mod rmtclean;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use partition::Partition;
pub use pipeline::{run_pipeline, run_window, RunConfig, RunSummary, WindowResult};
