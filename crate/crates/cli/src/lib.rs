//! The `changekit` command line.

pub mod cli;
pub mod commands;
pub mod config;

pub use cli::Cli;
pub use commands::run;
