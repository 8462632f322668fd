use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {x} lies outside the state space ({lo}, {hi})")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },

    /// The adaptive quadrature ran out of subdivisions (or a tail did not decay).
    #[error("quadrature did not reach tolerance: estimate {estimate}, error bound {error} ({reason})")]
    Accuracy {
        estimate: f64,
        error: f64,
        reason: String,
    },

    #[error("sign structure finer than the scan resolution: {0}")]
    Resolution(String),

    #[error("enlargement did not converge after {iterations} iterations (last iterate ({lo}, {hi}))")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    /// The whole state space became a single continuation interval.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("standing hypotheses violated: {0}")]
    Hypothesis(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("combinatorial budget exceeded: {required} candidates > limit {limit}")]
    Budget { required: u128, limit: u128 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Domain { .. } => "domain",
            Error::NonFinite { .. } => "non_finite",
            Error::Accuracy { .. } => "accuracy",
            Error::Resolution(_) => "resolution",
            Error::Convergence { .. } => "convergence",
            Error::Degenerate(_) => "degenerate",
            Error::Hypothesis(_) => "hypothesis",
            Error::Consistency(_) => "consistency",
            Error::Budget { .. } => "budget",
            Error::Config(_) => "config",
        }
    }
}
