//! The `sqac` command-line pipeline and completion service.

pub mod commands;
pub mod config;
pub mod service;

pub use commands::{run, Cli, Command};
pub use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sqac_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("server: {0}")]
    Server(std::io::Error),
}
