//! Library behind the `fieldsense` command-line tool: config loading, file
//! formats and task runners.

pub mod config;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod output;
pub mod run;
pub mod sensors_csv;

pub use config::{load_config, RunConfig};
pub use error::CliError;
