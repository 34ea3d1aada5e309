use std::io;

/// Errors raised across ingestion, factorization and mining.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mode {0}: expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid tensor entry: {0}")]
    InvalidEntry(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("rank {rank} exceeds dimension {dim} of mode {mode}")]
    RankTooLarge { mode: usize, rank: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite objective after sweep {iteration}; check the epsilon floor and input scale")]
    NonFinite { iteration: usize },

    #[error("FIT undefined: tensor {0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("schema edge ({0}) missing from graph")]
    MissingEdge(String),

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidMode(_) | Error::Config(_) | Error::RankTooLarge { .. } => {
                ErrorKind::Config
            }
            Error::NonFinite { .. } | Error::ZeroNorm(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
