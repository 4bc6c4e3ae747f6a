use alloc::string::String;

use crate::conic::SolveStatus;

/// Errors produced by the beamforming designs and their building blocks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {index} (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("negative input {0} where a nonnegative value is required")]
    NegativeInput(f64),

    #[error("channel matrix is rank deficient ({users} users, {antennas} antennas)")]
    RankDeficient { users: usize, antennas: usize },

    #[error("conic solver finished with status {0:?}")]
    Solver(SolveStatus),

    #[error("convex subproblem infeasible at iteration {iteration}")]
    InfeasibleSubproblem { iteration: usize },

    #[error("iteration limit of {0} reached without convergence")]
    IterationLimit(usize),

    #[error("no feasible candidate among {0} randomized beamformer sets")]
    RandomizationFailed(usize),

    #[error("no power budget configured")]
    MissingPowerBudget,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(String::from(msg))
}
