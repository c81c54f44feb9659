//! Config loading, commands and report files on top of `superhedge-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

pub use commands::{cmd_deform, cmd_hedge, cmd_price, cmd_simulate};
pub use config::{load_config, parse_config, Overrides, RunConfig, RunParams};
pub use error::CliError;
pub use report::{Outcome, OutputFile};
pub use verify::cmd_verify;
