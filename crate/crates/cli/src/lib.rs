//! Command-line harness: config parsing, dispatch and report files.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::run_command;
pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{exit, CliError};
pub use report::{read_curves, write_report, ReportFiles};
