//! Command-line front end: data ingestion, reports and subcommands.

pub mod commands;
pub mod error;
pub mod input;
pub mod report;

pub use error::CliError;
