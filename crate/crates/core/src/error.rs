use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cube index {index} out of range 1..={count}")]
    InvalidCubeIndex { index: usize, count: usize },

    #[error("peak parameters rejected: {0}")]
    PeakOutsideWindow(String),

    #[error("quadrature did not converge within {budget} subdivisions (last two estimates {previous} and {last})")]
    QuadratureNonConvergence { budget: usize, previous: f64, last: f64 },

    #[error("sample set too small: need at least {needed} points, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("point {0:?} lies outside the unit cube")]
    OutsideDomain(Vec<f64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inadmissible L^r exponent r = {r}: need 1/r in (({d} - {s}*{p})/({p}*{d}), 1]")]
    InadmissibleExponent { r: f64, s: f64, p: f64, d: usize },

    #[error("standing assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("truncation exponent 1/p - s/d = {0} is not positive; the control-variate estimator is the recommended method in this regime")]
    TruncationNotApplicable(f64),

    #[error("exact cell volumes need distinct training coordinates in d = 1")]
    DuplicatePoints,

    #[error("{0}")]
    Unsupported(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
