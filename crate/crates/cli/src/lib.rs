//! Std companion of `mzfisher-core`: configuration files, CSV/JSON output,
//! thread-pool parallelism and the `mzfisher` command line.
//!
//! Every subcommand is a pure function from a resolved [`RunConfig`] to an
//! [`Output`], so the binary is a thin shell around [`run`].

pub mod commands;
pub mod config;
pub mod formats;
pub mod parallel;

pub use commands::{run, Cli, CliError, Output};
pub use config::RunConfig;
