use thiserror::Error;

/// Errors raised by the localization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("need at least {required} samples per reference point, have {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("requested {requested} access points but only {available} exist")]
    TooManyAps { requested: usize, available: usize },

    #[error("equality system is infeasible: residual {residual:.3e} after projection")]
    Infeasible { residual: f64 },

    #[error("region of interest is empty at orientation index(es) {0:?}")]
    EmptyRoi(Vec<usize>),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
