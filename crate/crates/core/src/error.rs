use thiserror::Error;

/// Errors raised by the numerics kernels.
///
/// Variants fall into two families: domain errors (bad inputs, violated
/// invariants) and diagnostic failures (a solver or sampler could not meet
/// its own accuracy gate). [`Error::is_diagnostic`] tells them apart, which
/// the CLI uses to pick an exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("atoms must be strictly increasing in [0,1]: {0}")]
    NonMonotoneAtoms(String),
    #[error("cdf must be nondecreasing within [0,1]: {0}")]
    NonMonotoneCdf(String),
    #[error("cdf must terminate at exactly 1, got {0}")]
    CdfNotTerminatingAtOne(f64),
    #[error("atoms and cdf must have equal nonzero length (got {0} and {1})")]
    ShapeMismatch(usize, usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("quadrature order {0} outside [2, 256]")]
    OrderOutOfRange(usize),
    #[error("covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("base measure is empty or has zero mass")]
    EmptyMeasure,
    #[error("invalid functional order parameter: {0}")]
    InvalidFop(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("problem size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("perfect matching needs an even vertex count, got {0}")]
    OddN(usize),
    #[error("unknown test function: {0}")]
    UnknownTestFunction(String),
    #[error("grid too coarse: refinement moved the value by {0:e}")]
    GridTooCoarse(f64),
    #[error("grid too narrow: tail mass {0:e}")]
    GridTooNarrow(f64),
    #[error("optimizer diverged: {0}")]
    OptimizerDiverged(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("cascade truncation unstable: relative mass change {0:e}")]
    TruncationUnstable(f64),
    #[error("infinite Poisson mass on window starting at {0}")]
    InfiniteMass(f64),
}

impl Error {
    /// True for convergence and accuracy-gate failures, false for domain errors.
    pub fn is_diagnostic(&self) -> bool {
        matches!(
            self,
            Error::GridTooCoarse(_)
                | Error::GridTooNarrow(_)
                | Error::OptimizerDiverged(_)
                | Error::NotConverged(_)
                | Error::TruncationUnstable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
