use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("too few knots: need at least {needed}, got {got}")]
    TooFewKnots { needed: usize, got: usize },

    #[error("t = {t} outside spline domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("system matrix singular or indefinite (lambda = {lambda}, K = {k}, condition estimate {cond:.3e})")]
    SingularSystem { lambda: f64, k: usize, cond: f64 },

    #[error("numerical breakdown in recursive update at K = {k}: {message}; refactorization advised")]
    NumericalBreakdown { k: usize, message: String },

    #[error("sample times must be strictly increasing: new t = {t_new} after t = {t_last}")]
    NonIncreasingTime { t_new: f64, t_last: f64 },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    #[error("unknown method '{0}' (expected one of spline2, spline0, levant, hgo)")]
    UnknownMethod(String),

    #[error("no knots in evaluation window")]
    EmptyWindow,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularSystem { .. } | Error::NumericalBreakdown { .. } => 3,
            Error::UnknownMethod(_) | Error::UnsupportedConfig(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
