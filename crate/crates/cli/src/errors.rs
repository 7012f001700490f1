//! Error-to-exit-code mapping: 2 config, 3 data, 4 numeric abort,
//! 5 verification failure.

use thiserror::Error;
use wae_core::data::DataError;
use wae_core::metrics::MetricsError;
use wae_core::models::checkpoint::CheckpointError;
use wae_core::models::config::ConfigError;
use wae_core::models::ModelError;
use wae_core::ot::{InstanceParseError, OtError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric abort: {0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Verification(_) => 5,
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InstanceParseError> for CliError {
    fn from(e: InstanceParseError) -> Self {
        CliError::Data(format!("instance parse error: {e}"))
    }
}

impl From<OtError> for CliError {
    fn from(e: OtError) -> Self {
        match e {
            OtError::Solver(s) => CliError::Numeric(s.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
