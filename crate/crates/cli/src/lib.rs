//! Reproducible experiments over the `poincare-lab` library: configuration,
//! pipelines and serialized reports.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{validate_config, ConfigError, Experiment, ExperimentConfig};
pub use experiments::run;
pub use report::{Assertion, Cell, Reduce, RunReport, Stage, Table};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "POINCARE_LAB_THREADS";

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}
