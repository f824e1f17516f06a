//! Experiment harness behind the `ergoshift` binary: the transport table,
//! gambler's-ruin and integration fixtures, and the generator known-answer dump.

pub mod commands;
pub mod functions;

pub use commands::{CliError, Common, Format, Output, Status};
