use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {value} for {what}: {reason}")]
    InvalidDimension {
        what: &'static str,
        value: usize,
        reason: &'static str,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("interior window {window} does not fit truncation dimension {dim}")]
    InvalidWindow { window: usize, dim: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "rotation by theta = {theta} is not resolved at window {window}: \
         action residual {residual:.3e} exceeds {tolerance:.1e} \
         (largest passing window {largest_passing_window:?}, suggested dimension {suggested_dim:?})"
    )]
    TruncationAccuracy {
        theta: f64,
        window: usize,
        residual: f64,
        tolerance: f64,
        largest_passing_window: Option<usize>,
        suggested_dim: Option<usize>,
    },

    #[error("singular linear system (pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("{routine} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value produced in {routine}")]
    NonFinite { routine: &'static str },

    #[error("stationary state is not unique (relative pivot {pivot_ratio:.3e})")]
    AmbiguousStationaryState { pivot_ratio: f64 },

    #[error(
        "quadrature did not reach tolerance: estimate {estimate}, error {error_estimate:.3e}, target {tolerance:.1e}"
    )]
    Quadrature {
        estimate: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("time step {dt} exceeds the stability bound {max_stable}")]
    StepSize { dt: f64, max_stable: f64 },

    #[error("state is not supported here: {reason} (defect {defect:.3e})")]
    UnsupportedState { reason: &'static str, defect: f64 },

    #[error("dissipator coefficients are not completely positive (|c3|^2 - c1 c2 = {defect:.3e})")]
    NotCompletelyPositive { defect: f64 },

    #[error("no diagonalizing transformation found (best residual {residual:.3e})")]
    NoReduction { residual: f64 },

    #[error("{0}")]
    Other(String),
}
