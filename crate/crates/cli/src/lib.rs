//! File formats and commands for the `aglsec` tool.

pub mod cli;
pub mod commands;
pub mod corpus_io;
pub mod error;
pub mod formats;
pub mod manifest;

pub use error::{CliError, Result};
