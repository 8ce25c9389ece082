//! Configuration, output and subcommands of the `lambda-ob` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{load_config, parse_config, Format, RunConfig};
pub use error::CliError;
