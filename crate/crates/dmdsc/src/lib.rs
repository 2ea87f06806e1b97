//! Files, configuration, experiments and the command-line interface around
//! [`dmdsc_core`].
//!
//! - [`csv_io`]: datasets as `label,f1,...,fD` CSV.
//! - [`checkpoint`]: checksummed text checkpoints.
//! - [`config`]: TOML experiment configuration.
//! - [`report`]: evaluation reports, curves, training logs, sweep tables.
//! - [`experiments`]: the work behind each subcommand.
//! - [`cli`]: argument parsing and dispatch.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod experiments;
pub mod fsutil;
pub mod report;

pub use dmdsc_core as core;
pub use error::{Error, Result};
