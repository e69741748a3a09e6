use std::path::PathBuf;

/// Crate-wide error type. Variants carry enough context to point at the
/// offending word, file, or parameter without a backtrace.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty vocabulary: no word reached min_count")]
    EmptyVocabulary,

    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),

    #[error("vocabulary carries no token counts (loaded from an embedding file?); frequency-dependent operations need counts")]
    MissingCounts,

    #[error("dimension mismatch: {left} vs {right} ({context})")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("vocabulary intersection is empty")]
    EmptyIntersection,

    #[error("resolved landmark set has {got} words; at least {need} required")]
    TooFewLandmarks { got: usize, need: usize },

    #[error("SVD failed to converge on the {rows}x{cols} cross-covariance matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("training diverged: non-finite value in SGD update (parameter `{parameter}` = {value}; lower the learning rate)")]
    Diverged { parameter: &'static str, value: f64 },

    #[error("feature `{feature}` produced out-of-range value {value} for word {word:?}")]
    FeatureRange {
        feature: &'static str,
        word: String,
        value: f64,
    },

    #[error("target word {0:?} missing from the scored vocabulary intersection (policy = error)")]
    MissingTarget(String),

    #[error("{0} must not be constant: rank correlation is undefined")]
    ConstantInput(&'static str),

    #[error("input collections disagree: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
