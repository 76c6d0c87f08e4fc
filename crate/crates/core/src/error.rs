use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the highlight pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Input data violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A model or synthetic-stream specification is malformed.
    #[error("spec error: {0}")]
    Spec(String),

    /// Media could not be read or decoded.
    #[error("decode error for {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// A view (face, game or audio) is not available in the recording.
    #[error("view unavailable: {0}")]
    ViewUnavailable(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// Orchestration failure that is not attributable to one stage.
    #[error("pipeline error: {0}")]
    Pipeline(String),

    /// Failure inside a named pipeline stage.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    /// Malformed persisted file (annotations, manifests, archives).
    #[error("parse error: {0}")]
    Parse(String),

    /// A broken internal invariant. Should never surface.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
