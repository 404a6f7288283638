use std::path::PathBuf;

use qattr_core::attribution::AttributionError;
use qattr_core::corpus::CorpusError;
use qattr_core::inference::InferenceError;
use qattr_core::memaudit::MemauditError;
use qattr_core::prompting::PromptError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("corpus validation failed: {0}")]
    Corpus(String),
    #[error("capability missing: {0}")]
    Capability(String),
    #[error("{0}")]
    Prerequisite(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 transport/backend or I/O, 2 corpus validation,
    /// 3 missing capability, 4 missing prerequisite or bad configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Backend(_) | CliError::Io { .. } => 1,
            CliError::Corpus(_) => 2,
            CliError::Capability(_) => 3,
            CliError::Prerequisite(_) | CliError::Config(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::ScoringUnsupported { .. } => CliError::Capability(e.to_string()),
            InferenceError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { path, source } => CliError::Io { path, source },
            CorpusError::BadPattern(_) => CliError::Config(e.to_string()),
            _ => CliError::Corpus(e.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AttributionError> for CliError {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::Inference(e) => e.into(),
            AttributionError::Prompt(e) => e.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<MemauditError> for CliError {
    fn from(e: MemauditError) -> Self {
        match e {
            MemauditError::Inference(e) => e.into(),
            MemauditError::Prompt(e) => e.into(),
            MemauditError::Corpus(e) => e.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}
