//! Command-line front end: configuration files, observables and the
//! experiment driver behind the `eddy-pint` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod observable;

pub use config::RunConfig;
pub use error::{exit_code, CliError};
pub use experiment::{run_config, run_experiment, Outcome, Overrides};
