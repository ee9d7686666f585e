//! Command-line front end and local HTTP service over `omnimotion-core`.

pub mod args;
pub mod commands;
pub mod error;
pub mod serve;

pub use args::{Cli, Command};
pub use commands::{run, Outcome};
pub use error::{CliError, Result};
