use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mollifier width {width} is not below the minimal atom gap {gap}")]
    KernelOverlap { width: f64, gap: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("eigenvector changes sign (min/max = {min_ratio:e}); principal branch missed")]
    SpuriousMode { min_ratio: f64 },

    #[error("time step unstable: {0}")]
    Stability(String),

    #[error("dispersion root not bracketed in [{lo}, {hi}] at lambda = {lambda}")]
    BracketFailure { lambda: f64, lo: f64, hi: f64 },

    #[error("periodic eigenvector not positive at lambda = {lambda}, mu = {mu}")]
    PrincipalBranch { lambda: f64, mu: f64 },

    #[error("at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("speed minimiser escaped the scan range: minimum at lambda = {lambda} (edge of [{lo}, {hi}])")]
    BracketEscape { lambda: f64, lo: f64, hi: f64 },

    #[error("scheme violation: {0}")]
    SchemeViolation(String),

    #[error("front positions not monotone: backtrack of {backtrack} exceeds jitter tolerance {tolerance}")]
    NoisyFront { backtrack: f64, tolerance: f64 },

    #[error("trace contaminated by the boundary at t = {time}")]
    Contaminated { time: f64 },

    #[error("leading edge too small: {0}")]
    InsufficientEdge(String),

    #[error("coefficient has no atoms to mollify")]
    NothingToMollify,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn at_lambda(self, lambda: f64) -> Self {
        Error::AtLambda {
            lambda,
            source: Box::new(self),
        }
    }
}
