//! Library half of the `odit` command-line tool: configuration, CSV
//! ingestion, model persistence, and the command implementations. The binary
//! in `main.rs` is a thin argument-parsing shell over this.

#![forbid(unsafe_code)]

pub mod archive;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use error::{CliError, CliResult};
