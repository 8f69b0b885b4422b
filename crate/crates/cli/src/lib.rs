//! Command-line tools and the `/v1` session service.

pub mod config;
pub mod error;
pub mod server;

pub use config::{Mode, ServiceConfig};
pub use error::{CliError, ExitKind};
