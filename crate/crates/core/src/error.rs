use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: entry ({row}, {col}) deviates by {deviation:.3e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid assemblage: {0}")]
    InvalidAssemblage(String),

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("map is not trace non-increasing: min eigenvalue of I - sum K^dag K is {0:.3e}")]
    NotTraceNonIncreasing(f64),

    #[error("degenerate filter: success probability {0:.3e} is below 1e-12")]
    DegenerateFilter(f64),

    #[error("invalid steering functional: {0}")]
    InvalidFunctional(String),

    #[error("enumeration cap exceeded: {count} strategies (cap {cap})")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no Werner parameter reproduces the model: best w = {w}, residual {residual:.3e}")]
    WernerMismatch { w: f64, residual: f64 },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("malformed input: {0}")]
    Parse(String),
}
