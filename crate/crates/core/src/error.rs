use thiserror::Error;

/// Errors produced by construction and numerics across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signal must be nonempty")]
    EmptySignal,

    #[error("signal contains a non-finite value at index {index} (t = {})", index + 1)]
    NonFiniteSample { index: usize },

    #[error("denominator polynomial must have a nonzero leading coefficient")]
    ZeroDenominator,

    #[error("transfer function is improper (relative degree {relative_degree}); forward filtering requires relative degree >= 0")]
    ImproperFilter { relative_degree: i64 },

    #[error("denominator vanishes at z = 1; deflate the (z - 1) factor before taking the dc gain")]
    PoleAtOne,

    #[error("transfer function is unstable: denominator root at |z| = {magnitude}")]
    UnstableFilter { magnitude: f64 },

    #[error("z = {root} is not a root of the polynomial (residual {residual:e} exceeds tolerance {tol:e})")]
    NotARoot { root: f64, residual: f64, tol: f64 },

    #[error("polynomial must have degree >= 1 to deflate a root")]
    DegreeTooLow,

    #[error("step response did not settle within {horizon} samples")]
    NotSettled { horizon: usize },

    #[error("band must lie strictly between 0 and 1, got {band}")]
    InvalidBand { band: f64 },

    #[error("breakpoints must be finite and strictly increasing")]
    InvalidBreakpoints,

    #[error("piecewise-affine map requires one more slope than breakpoints and all slopes > 0")]
    InvalidSlopes,

    #[error("dictionary must contain at least one basis function")]
    EmptyDictionary,

    #[error("dictionary scale must be positive, got {scale}")]
    InvalidScale { scale: f64 },

    #[error("deadzone dictionary requires spacing * (m - 1) < scale (got spacing {spacing}, m {m}, scale {scale})")]
    DeadzoneTooWide { spacing: f64, m: usize, scale: f64 },

    #[error("parameter vector has length {got} but the dictionary has {expected} basis functions")]
    ParamLengthMismatch { got: usize, expected: usize },

    #[error("parameter vector contains a non-finite entry at index {index}")]
    NonFiniteParam { index: usize },

    #[error("plant linear block must be strictly proper (relative degree >= 1)")]
    NotStrictlyProper,

    #[error("noise standard deviation must be nonnegative, got {sigma}")]
    NegativeSigma { sigma: f64 },

    #[error("unknown built-in plant id {id}; available ids are 1 and 2")]
    UnknownPlant { id: u8 },

    #[error("unknown ideal controller id {id}; available ids are 1 and 2")]
    UnknownController { id: u8 },

    #[error("reference model dc gain is {gain}, expected 1 within {tol:e}")]
    ReferenceGainNotUnity { gain: f64, tol: f64 },

    #[error("input and output signals have different lengths ({input} vs {output})")]
    DatasetLengthMismatch { input: usize, output: usize },

    #[error("dataset has {n} samples; at least {min} are required")]
    DatasetTooShort { n: usize, min: usize },

    #[error("signal of length {n} is too short for a relative degree of {relative_degree}")]
    SignalTooShort { n: usize, relative_degree: usize },

    #[error("integrator state is non-finite at index {index} (t = {})", index + 1)]
    NonFiniteRegressorState { index: usize },

    #[error("regressor matrix entry ({row}, {col}) is non-finite")]
    NonFiniteRegressor { row: usize, col: usize },

    #[error("regression problem is empty")]
    EmptyProblem,

    #[error("signals have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("solver max_iter must be at least 1")]
    ZeroMaxIter,

    #[error("regularization weight must be nonnegative, got {alpha}")]
    NegativeAlpha { alpha: f64 },

    #[error("reference dwell must be at least 1 sample")]
    ZeroDwell,

    #[error("reference amplitude list must be nonempty")]
    EmptyReference,
}

pub type Result<T> = std::result::Result<T, Error>;
