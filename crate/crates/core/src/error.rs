use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("merge refused: activation deviation {max_deviation:e} exceeds tolerance {tolerance:e}")]
    MergeRefused { max_deviation: f64, tolerance: f64 },

    #[error("no balanced teacher after {attempts} attempts (last probe balance {last_balance:.4})")]
    TeacherSearchFailed { attempts: usize, last_balance: f64 },

    #[error("dataset label balance {balance:.4} outside [{low}, {high}]")]
    Imbalanced { balance: f64, low: f64, high: f64 },

    #[error("model file: unsupported format version {found} (reader supports {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("model file truncated: {0}")]
    Truncated(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
