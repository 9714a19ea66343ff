use thiserror::Error;

/// Errors raised while building, solving or verifying a switching problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchError {
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// A bracketed root-find could not locate a sign change. The existence
    /// results guarantee brackets for every equation, so this signals a defect.
    #[error("root not bracketed while solving `{equation}` on [{lo}, {hi}]")]
    RootNotBracketed {
        equation: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("second derivative undefined at x = {0} (boundary or payoff jump)")]
    UndefinedSecondDerivative(f64),

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid boundary perturbation: {0}")]
    InvalidPerturbation(String),
}

impl SwitchError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidProblem(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Self::PreconditionViolated(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SwitchError>;
