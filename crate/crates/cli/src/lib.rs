//! Command-line front end: configuration, subcommands and report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::{cmd_bench, cmd_scenario, cmd_simulate, cmd_tune};
pub use config::{parse_config, parse_config_str, Format, Overrides, RunConfig};
pub use error::CliError;
