use thiserror::Error;

/// Errors produced by the analysis routines.
///
/// Node indices carried by the variants are 1-based, matching every
/// user-facing report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row")]
    EmptyMatrix,

    #[error("row {row} has {found} entries, expected {expected}")]
    NotSquare {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("entry ({row}, {col}) = {value} is a negative off-diagonal entry; matrix is not Metzler")]
    NotMetzler { row: usize, col: usize, value: f64 },

    #[error("prefix size {size} is outside 1..={dim}")]
    IndexOutOfRange { size: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("pivot of the {size}x{size} working matrix is zero to working precision")]
    ZeroPivot { size: usize },

    #[error("more than {cap} simple cycles")]
    TooManyCycles { cap: usize },

    #[error("more than {cap} disjoint cycle families")]
    CombinatorialBlowup { cap: usize },

    #[error("diagonal entry {node} is not negative")]
    NonNegativeDiagonal { node: usize },

    #[error("edge {from} -> {to} has no gain entry")]
    MissingEdge { from: usize, to: usize },

    #[error("feasibility witness is invalid: {0}")]
    InvalidWitness(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid simulation setup: {0}")]
    InvalidSimulation(String),

    #[error("state exceeded overflow guard at t = {time}")]
    StepRejected { time: f64 },

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
