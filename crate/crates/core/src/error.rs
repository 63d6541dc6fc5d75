use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The linear predictor hit the exponent clamp.
    #[error("ill-scaled input: linear predictor {eta:.3} at observation {row} exceeds the +/-{limit} clamp")]
    IllScaled { row: usize, eta: f64, limit: f64 },

    /// A cross-product matrix could not be factorized.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("IRLS did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Selector inputs carry no usable coordinate.
    #[error("degenerate selector input: {0}")]
    DegenerateSelector(String),

    /// Too many replications of a simulation cell were excluded.
    #[error("degenerate simulation cell: {excluded} of {reps} replications excluded ({reason})")]
    DegenerateCell {
        excluded: usize,
        reps: usize,
        reason: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidParam(_) => 1,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Dimension(_) => 2,
            Error::Domain(_)
            | Error::IllScaled { .. }
            | Error::Singular(_)
            | Error::NotConverged { .. }
            | Error::DegenerateSelector(_)
            | Error::DegenerateCell { .. } => 3,
        }
    }
}
