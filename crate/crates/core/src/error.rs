use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema error in {location}: {message}")]
    SchemaError { location: String, message: String },

    #[error("alignment error in set '{set_id}': model '{model_id}' {message}")]
    AlignmentError {
        set_id: String,
        model_id: String,
        message: String,
    },

    #[error("stochasticity error: model '{model_id}', example '{example_id}': {message}")]
    StochasticityError {
        model_id: String,
        example_id: String,
        message: String,
    },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("unknown label '{0}'")]
    UnknownLabel(String),

    #[error("unknown metric '{0}'")]
    UnknownMetric(String),

    #[error("unknown consensus method '{0}'")]
    UnknownMethod(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("support vector is not stochastic: {0}")]
    NotStochastic(String),

    #[error("model '{0}' has no confidence vectors in this set")]
    MissingConfidences(String),

    #[error("model '{0}' has no predictions in set '{1}'")]
    MissingPredictions(String, String),

    #[error("model '{model_id}' benign accuracy {accuracy:.4} is below threshold {threshold:.4}")]
    BelowAccuracyThreshold {
        model_id: String,
        accuracy: f64,
        threshold: f64,
    },

    #[error("model '{model_id}' has the same structural tags as '{existing}'")]
    DuplicateStructure { model_id: String, existing: String },

    #[error("model '{0}' is already in the pool")]
    DuplicateModel(String),

    #[error("pool of {pool} models is too small for min_size {min_size}")]
    PoolTooSmall { pool: usize, min_size: usize },

    #[error("team of {size} members cannot drop below min_size {min_size}")]
    TeamTooSmall { size: usize, min_size: usize },

    #[error("team must contain the target model '{0}'")]
    TargetRequired(String),

    #[error("need at least {needed} teams, got {got}")]
    TooFewTeams { needed: usize, got: usize },

    #[error("need at least {needed} examples, got {got}")]
    InsufficientExamples { needed: usize, got: usize },

    #[error("team pool is empty")]
    EmptyPool,

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SchemaError {
            location: location.into(),
            message: message.into(),
        }
    }
}
