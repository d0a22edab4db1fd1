use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the declared state bounds.
    #[error("point {point:?} lies outside the state bounds")]
    OutOfBounds { point: Vec<f64> },

    /// An action grid must contain at least one atom.
    #[error("action grid has no atoms")]
    EmptyActionGrid,

    /// An enumeration would exceed the configured cap.
    #[error("enumeration of {what} has {count} elements, exceeding the cap {cap}")]
    CapExceeded {
        what: String,
        count: u128,
        cap: u128,
    },

    /// Two measures were expected to share a support.
    #[error("support sizes differ: {left} vs {right}")]
    SupportMismatch { left: usize, right: usize },

    /// Two point clouds were expected to have equal size.
    #[error("cloud sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    /// A joint measure's state marginal does not match the given state measure.
    #[error("joint measure marginal {marginal:?} does not match state counts {expected:?}")]
    InvalidAction {
        marginal: Vec<u32>,
        expected: Vec<u32>,
    },

    /// A kernel row failed the stochasticity invariant.
    #[error("kernel row (state {state}, action {action}) sums to {sum}, defect {defect:e}")]
    NonStochasticKernel {
        state: usize,
        action: usize,
        sum: f64,
        defect: f64,
    },

    /// The contraction condition `2 K_f beta < 1` is violated.
    #[error("contraction condition violated: 2*K_f*beta = {0} >= 1")]
    ContractionViolated(f64),

    /// A rollout produced a feedback measure with no policy entry.
    #[error("no policy entry for feedback measure with counts {counts:?}")]
    UnreachableState { counts: Vec<u32> },

    /// A model, grid, or configuration value is structurally invalid.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A registry lookup failed.
    #[error("unknown model '{0}'")]
    UnknownModel(String),

    /// A text artifact could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
