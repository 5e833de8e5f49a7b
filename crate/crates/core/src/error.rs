use alloc::string::String;

/// Errors raised by the solicitation engines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A model parameter is out of its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A hazard was requested at an epoch no client can survive to.
    #[error("cannot condition on survival to epoch {epoch}: survival probability is zero")]
    ConditioningOnNull { epoch: u64 },

    /// The series for the despair time did not reach the truncation threshold.
    #[error("series truncation failed: residual {residual:e} still above alpha {alpha:e} after {hard_cap} terms")]
    TruncationFailure {
        hard_cap: usize,
        residual: f64,
        alpha: f64,
    },

    /// Exhaustive enumeration would visit more states than allowed.
    #[error("enumeration needs {states} states, budget is {budget}")]
    StateBudgetExceeded { states: u128, budget: u128 },

    /// A planning target cannot be met inside the search bracket.
    #[error("target {target} is infeasible: best achievable expected sales is {achieved}")]
    Infeasible { target: f64, achieved: f64 },

    /// A price curve was evaluated outside its tabulated range.
    #[error("price {w} is outside the tabulated range [{lo}, {hi}]")]
    CurveDomain { w: f64, lo: f64, hi: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
