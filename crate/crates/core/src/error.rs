use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A modulus of continuity with `alpha = 0` needs `beta > 0`.
    #[error("inadmissible modulus: alpha = {alpha}, beta = {beta}")]
    InadmissibleModulus { alpha: f64, beta: f64 },

    /// No calibration constant in the scanned range made the modulus
    /// increasing and concave.
    #[error("no admissible r0 found for alpha = {alpha}, beta = {beta}")]
    NoCalibration { alpha: f64, beta: f64 },

    #[error("half ratio is undefined for alpha = 0")]
    HalfRatioUndefined,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid size mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),

    /// Exhaustive word enumeration would exceed the configured cap.
    #[error("exhaustive enumeration of {count} words exceeds the cap of {cap}")]
    TooManyWords { count: u128, cap: u128 },

    #[error("measures have different total mass: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("potential does not satisfy the neutral-set precondition: {0}")]
    NeutralPrecondition(String),

    #[error("iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("contraction bound fails: a = {0}")]
    ContractionBound(f64),

    #[error("trace unsuitable for fitting: {0}")]
    Fit(String),

    #[error("invalid decay model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
