//! IO, benchmarking and reporting around the `dse-core` estimators.
//!
//! The binary target `dse` wires these pieces to a command line; the library
//! surface exists so integration tests can drive the exact same paths.

pub mod clock;
pub mod experiment;
pub mod formats;
pub mod plot;
pub mod report;

pub use clock::StdClock;
pub use experiment::{run_experiment, ExperimentConfig, MetricsRow, RunOutcome};
pub use formats::{load_case, load_partition, save_partition, CliError};
