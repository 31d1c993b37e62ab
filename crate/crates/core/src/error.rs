use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("gamma must be a finite non-negative number, got {0}")]
    InvalidGamma(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vocabulary size {m} is not divisible by alphabet size {k}")]
    NotDivisible { m: usize, k: usize },

    #[error("infeasible min-entropy constraint lambda={lambda} for m={m}")]
    InfeasibleLambda { lambda: f64, m: usize },

    #[error("only uniform side information is supported")]
    NonUniformSideInfo,

    #[error("token {token} outside vocabulary of size {m}")]
    TokenOutOfRange { token: usize, m: usize },

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("solver invariant violated: {0}")]
    SolverBug(String),
}
