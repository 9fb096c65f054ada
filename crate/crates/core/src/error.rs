use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown preset `{0}` (expected switching, slow, frequent, lti or custom)")]
    UnknownPreset(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("(episode {episode}, step {step}) is outside the schedule")]
    OutOfSchedule { episode: usize, step: usize },

    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("candidate model is ill-conditioned (R + B'PB not positive definite)")]
    CandidateIllConditioned,

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("record covers {got} episodes but the environment has {expected}")]
    EpisodeMismatch { expected: usize, got: usize },

    #[error("sequence tail has no positive values")]
    NonPositiveTail,

    #[error("config error for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
