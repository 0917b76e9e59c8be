//! Configuration-driven experiments for subdiffusion reconstructions with an
//! unknown terminal time.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod examples;
pub mod runs;

pub use config::{ConfigError, ExperimentConfig};
pub use examples::Example;
pub use runs::{RunError, RunResult, TableReport, TableRow};
