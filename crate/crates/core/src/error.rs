use std::path::PathBuf;
use std::time::Duration;

/// Crate-wide error type.
///
/// `Config` covers caller mistakes that should be caught before any work
/// runs; `Parse` carries the offending file and one-based line. Scorer
/// failures distinguish transport problems (`Scorer`, `Timeout`) from
/// responses that violate the protocol contract (`Protocol`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}", path = path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}", path = path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("label {label:?} has no example in the training folds")]
    MissingLabel { label: String },

    #[error("iteration {iteration}: training folds {folds:?} have no example with label {label:?}")]
    FoldMissingLabel {
        iteration: usize,
        folds: Vec<usize>,
        label: String,
    },

    #[error("boost iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot score empty text")]
    EmptyText,

    #[error("candidate (origin {origin_id}, draw {draw_index}) has no score; run the surrogate before filtering")]
    Unscored { origin_id: usize, draw_index: usize },

    #[error("relative perplexity mode needs the training-median perplexity")]
    MissingMedian,

    #[error("scoring failed for candidate (origin {origin_id}, draw {draw_index}): {source}")]
    CandidateScoring {
        origin_id: usize,
        draw_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scorer protocol violation: {msg}; response: {raw}")]
    Protocol { msg: String, raw: String },

    #[error("scorer transport error: {0}")]
    Scorer(String),

    #[error("scorer gave no response within {0:?}")]
    Timeout(Duration),

    #[error("aspect {aspect:?} lost while augmenting example {origin_id}")]
    AspectLost { origin_id: usize, aspect: String },

    #[error("feature matrix has rank below 2; nothing to embed")]
    RankDeficient,

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("training corpus has an empty vocabulary")]
    EmptyVocabulary,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Public so front ends can flag their own configuration mistakes.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that indicate a bad configuration rather than a
    /// runtime failure. Front ends map these to a distinct exit code.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Iteration { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
