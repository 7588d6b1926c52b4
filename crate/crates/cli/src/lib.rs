//! Configuration, run orchestration and report emission for the `coliseum`
//! command-line tool.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
