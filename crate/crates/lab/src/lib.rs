//! Experiment harness for the `noma-core` designs.
//!
//! Experiments are described by a TOML [`config::ExperimentSpec`], executed
//! by [`runner::run_experiment`] and written as CSV or JSON rows by
//! [`results`]. [`figures`] holds the per-figure recipes and [`checks`] the
//! cross-method consistency checks.

pub mod checks;
pub mod config;
pub mod error;
pub mod figures;
pub mod io;
pub mod results;
pub mod runner;

pub use error::{LabError, Result};
