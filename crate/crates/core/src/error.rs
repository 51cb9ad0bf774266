use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NbError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    /// Some user cannot be strictly better off than at the disagreement point.
    #[error("cooperation infeasible: user {user} gets {rate} <= disagreement {disagreement}")]
    BelowDisagreement {
        user: usize,
        rate: f64,
        disagreement: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no point of the SMC Pareto boundary is reachable under the power limits")]
    EmptyFeasibleBoundary,

    #[error("degenerate rate region: {0}")]
    DegenerateRegion(String),

    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, NbError>;
