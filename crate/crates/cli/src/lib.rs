//! Command-line front end: CSV ingestion, the four subcommands and their
//! JSON/CSV artifacts.


#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod ingest;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
pub use ingest::{ayp_standard_error, read_observations, read_records, trim_by_se_percentile, IngestRecord};
