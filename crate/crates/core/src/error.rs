use alloc::string::String;
use thiserror::Error;

/// Errors produced by model construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("branch {from}-{to} references a bus that does not exist")]
    DanglingBranch { from: usize, to: usize },
    #[error("branch {from}-{to} has non-positive reactance {x}")]
    NonPositiveReactance { from: usize, to: usize, x: f64 },
    #[error("branch {from}-{to} is a self-loop")]
    SelfLoop { from: usize, to: usize },
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("slack bus {0} does not exist")]
    UnknownSlack(usize),
    #[error("network graph is disconnected")]
    Disconnected,
    #[error("measurement set does not make the system observable")]
    Unobservable,
    #[error("linear system is singular or severely ill-conditioned")]
    SingularSystem,
    #[error("partition is invalid: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix splitting has spectral radius {rho} >= 1; iteration would not converge")]
    NonConvergentSplit { rho: f64 },
    #[error("iteration diverged at iteration {iteration} (|x| = {norm})")]
    Diverged { iteration: usize, norm: f64 },
    #[error("objective increased for {0} consecutive iterations; aborting as oscillation")]
    Oscillation(usize),
    #[error("NaN encountered in iterates at iteration {0}")]
    NanIterate(usize),
    #[error("area graph has no adjacent area pairs")]
    NoAdjacentAreas,
    #[error("measurement index {index} out of range ({len} measurements)")]
    MeasurementIndex { index: usize, len: usize },
    #[error("infeasible partitioning request: K*b_lim = {requested} exceeds {buses} buses")]
    InfeasiblePartition { requested: usize, buses: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
