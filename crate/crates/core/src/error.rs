use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge on [{lower}, {upper}]: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("root finding failed for level {level}: bracket [{lower}, {upper}]")]
    RootFinding { level: f64, lower: f64, upper: f64 },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("refinement budget exceeded: {required} points required, budget is {budget}")]
    RefinementBudget { required: usize, budget: usize },

    /// Joint laws of this family are not available in closed or quadrature form.
    #[error("{0}: joint law unavailable analytically, Monte-Carlo-only")]
    MonteCarloOnly(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::RootFinding { .. } | Error::Factorization(_) | Error::Consistency(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
