use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("sampling grids differ: {0}")]
    GridMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("hypothesis violated by intervals {0} and {1}")]
    HypothesisViolation(usize, usize),

    #[error("stage `{stage}` rejected input: {witness}")]
    StageRejected { stage: String, witness: String },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidArgument { arg, reason: reason.into() }
    }

    pub fn rejected(stage: impl Into<String>, witness: impl Into<String>) -> Self {
        LabError::StageRejected { stage: stage.into(), witness: witness.into() }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
