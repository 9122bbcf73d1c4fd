//! Library side of the `ensemble-minimax` command line: file formats,
//! report rendering and the subcommands.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, CliResult};
