//! Experiment runner around [`fpme_core`]: TOML configuration, file formats
//! and the `fpme` subcommands.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod formats;

pub use commands::Status;
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
