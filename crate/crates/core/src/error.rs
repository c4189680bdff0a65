use thiserror::Error;

/// Errors raised by oracles, solvers and bound evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("projection at t={t} requested at distance {distance} >= prox-regularity constant {prox_const}")]
    RegionViolation { t: f64, distance: f64, prox_const: f64 },

    #[error("point is not in C({t}): distance {distance}")]
    PointNotInSet { t: f64, distance: f64 },

    #[error("vector is not a proximal normal at the given point (deviation {deviation})")]
    NotANormal { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("initial point is outside C(T0): distance {distance}")]
    InfeasibleInitialPoint { distance: f64 },

    #[error("kernel evaluated outside s <= t (t={t}, s={s})")]
    KernelDomain { t: f64, s: f64 },

    #[error("grid functions or trajectories are defined on different grids")]
    GridMismatch,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error("r0 = {r0} is smaller than |x0 - q0| = {required}")]
    R0TooSmall { r0: f64, required: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("successive approximations did not converge within {} iterations", .0.records.len())]
    MaxIterationsExceeded(Box<crate::filippov::IterationReport>),
}

pub type Result<T> = std::result::Result<T, Error>;
