//! Monte-Carlo benchmarks for Kronecker-structured sparse recovery.

pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod output;

pub use config::{AlgorithmSpec, ExperimentConfig};
pub use error::{BenchError, Result};
pub use harness::{run_experiment, summarize, ExperimentOutput, SummaryRow, TrialFailure, TrialRecord};
