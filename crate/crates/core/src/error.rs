use alloc::boxed::Box;

use crate::lp::LpStatus;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a market needs at least 2 peers, got {0}")]
    TooFewPeers(usize),

    #[error("endowment of peer {index} must be positive and finite, got {value}")]
    InvalidEndowment { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("allocation entry ({row}, {col}) is invalid: {value}")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("self-allocation of peer {0} must be zero")]
    NonZeroDiagonal(usize),

    #[error("column {column} sums to {sum}, expected endowment {endowment}")]
    ColumnInfeasible { column: usize, sum: f64, endowment: f64 },

    #[error("divergence undefined: u[{0}] > 0 but v[{0}] = 0")]
    DivergenceDomain(usize),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("degenerate state at peer {peer}: {reason}")]
    DegenerateState { peer: usize, reason: &'static str },

    #[error("multiplier of peer {peer} leaves a non-positive bid denominator")]
    MultiplierDomain { peer: usize },

    #[error("could not bracket the budget multiplier of peer {peer}")]
    BracketFailure { peer: usize },

    #[error("reciprocity target {theta} is infeasible for these endowments")]
    InfeasibleTarget { theta: f64 },

    #[error("problem with {n} peers exceeds the exhaustive-search limit {max_n}")]
    ProblemTooLarge { n: usize, max_n: usize },

    #[error("linear program failed: {0:?}")]
    Lp(LpStatus),

    #[error("step {t} failed: {source}")]
    StepFailed { t: u64, source: Box<Error> },
}
