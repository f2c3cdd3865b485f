use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("boundary classification: {0}")]
    Classification(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("preconditioner setup: {0}")]
    Setup(String),

    #[error("sample {sample} failed at step {step}: {source}")]
    Sample {
        sample: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("hash table corrupted: {0}")]
    Corruption(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Process exit code grouped by failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::Parse { .. } => 3,
            Error::Io { .. } => 4,
            Error::NonConvergence { .. } | Error::Sample { .. } | Error::Step { .. } => 5,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
