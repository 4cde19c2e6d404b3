use std::io;
use std::path::PathBuf;

use adeim_core::driver::{ConfigError, DriverError, MetricError};
use adeim_core::io::IoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid config {path}:\n{message}")]
    InvalidConfig { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("cannot create {path}: {source}")]
    CreateDir {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("artifacts do not match: {0}")]
    Mismatch(#[from] MetricError),
    #[error(transparent)]
    Driver(DriverError),
    #[error("{0}")]
    Numerical(String),
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::Config(c) => Self::Config(c),
            other => Self::Driver(other),
        }
    }
}

impl CliError {
    /// 1 for numerical failures, 2 for everything the user can fix by
    /// changing arguments, config or files.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Driver(_) | Self::Numerical(_) => 1,
            _ => 2,
        }
    }
}
