//! Perfect posterior sampling for Dirichlet-process mixtures of Markov
//! chains: data ingestion, run configuration, concurrent sampling into
//! JSON-lines records, posterior summaries and diagnostics. The algorithms
//! live in `catclust-core`.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod exec;
pub mod io;
pub mod records;
pub mod sampling;
pub mod summarize;

pub use error::{Error, Result};
