use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported dimension {0}, expected 1 or 2")]
    UnsupportedDimension(usize),

    #[error("node {0:?} is not an interior node")]
    NotInterior(Vec<usize>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("monotonicity violation at node {node}: neighbor coefficient {coefficient:e} > 0")]
    MonotonicityViolation { node: usize, coefficient: f64 },

    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),

    #[error("singular matrix at column {0}")]
    SingularMatrix(usize),

    #[error("linear solver did not converge: {iterations} sweeps, last update {update:e}")]
    SolverDiverged { iterations: usize, update: f64 },

    #[error("too few usable points for a fit: {0}")]
    TooFewPoints(usize),

    #[error("unknown name {0:?}")]
    UnknownName(String),

    #[error("control box too small: reference control {required:.4} exceeds a_max {a_max:.4}")]
    ControlSaturation { required: f64, a_max: f64 },

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
