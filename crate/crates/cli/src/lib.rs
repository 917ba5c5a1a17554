//! Batch driver for the grating engine: config ingestion, orchestration and
//! machine-readable output.

pub mod commands;
pub mod error;
pub mod output;
pub mod spec;
pub mod validate;

pub use commands::{Command, RunOutput, run};
pub use error::CliError;
pub use spec::{ConfigDocument, RunSpec, parse_run_spec};
