//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument to a tensor/geometry operation (slot mismatch, out-of-range axis, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// Two fields live on different charts.
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    /// Tensor signatures are incompatible for the requested operation.
    #[error("signature mismatch: expected ({expected_p},{expected_q}), got ({got_p},{got_q})")]
    Signature {
        expected_p: usize,
        expected_q: usize,
        got_p: usize,
        got_q: usize,
    },

    /// A metric (or candidate metric) failed positivity; carries the largest
    /// admissible perturbation amplitude when known.
    #[error("positivity violated: min eigenvalue {min_eig:.3e}{}", max_admissible_eps.map(|e| format!(", max admissible epsilon {e:.3e}")).unwrap_or_default())]
    Positivity {
        min_eig: f64,
        max_admissible_eps: Option<f64>,
    },

    /// Degenerate initial-data request (e.g. coefficient vector parallel to the mode symbol).
    #[error("degenerate data spec: {0}")]
    Degenerate(String),

    /// A flow step could not maintain metric positivity after retries.
    #[error("positivity breakdown at t = {t:.6e} (dt = {dt:.3e} after {rejects} rejections)")]
    PositivityBreakdown { t: f64, dt: f64, rejects: usize },

    /// An identity case was requested in an unsupported dimension.
    #[error("dimension constraint: case {case} requires n = {required}, got n = {got}")]
    DimConstraint {
        case: String,
        required: usize,
        got: usize,
    },

    /// Configuration file / CLI rejection; always names the offending field.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed snapshot or CSV input.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
