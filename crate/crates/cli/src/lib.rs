//! Experiment runner for graph energy flows: configuration parsing, CSV and
//! SVG output, the bipartite demo and the verify suite front end.

pub mod config;
pub mod demo;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod suite;

pub use config::ExperimentConfig;
pub use demo::{preset_bipartite_demo, DemoOutcome, DemoParams};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentOutcome};
