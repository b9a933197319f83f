//! Experiment drivers behind the `eerk` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
