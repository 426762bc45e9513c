use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate burst: all samples are zero")]
    DegenerateBurst,

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("degenerate likelihood: fpr={fpr}, tpr={tpr} must lie strictly inside (0, 1)")]
    DegenerateLikelihood { fpr: f64, tpr: f64 },

    #[error("degenerate posterior: averaged softmax probability is zero")]
    DegeneratePosterior,

    #[error("divergence: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("class {0} has no accurately classified training records")]
    EmptyClass(usize),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("head mismatch: {0}")]
    HeadMismatch(String),

    #[error("layout mismatch: expected {expected} parameters, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },

    #[error("overlapping classes between tasks: {0:?}")]
    OverlappingClasses(Vec<usize>),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported model format version {0}")]
    FormatVersion(u32),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
