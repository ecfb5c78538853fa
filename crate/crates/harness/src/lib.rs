//! Configuration-driven experiment runner for island particle filters.
//!
//! An [`ExperimentConfig`] names a model, a list of `(N1, N2)` cells and
//! within/across scheme pairs. [`run_experiment`] runs every replication on a
//! worker pool and returns raw rows, per-group summaries against the model's
//! oracle, and failures; [`write_outputs`] renders them as CSV.

pub mod config;
pub mod crossover;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod stats;
pub mod tables;

pub use config::{AcrossKind, ExperimentConfig, ModelSpec, SchemePair, WithinKind};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, write_outputs, Experiment, RawRow};
pub use stats::SummaryRow;
