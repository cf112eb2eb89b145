use thiserror::Error;

/// Errors raised by construction, validation and the numerical solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("a piecewise-linear function needs at least one affine piece")]
    EmptyPieces,

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("lambda must satisfy lambda > 0 (got {0}); the transform is +inf at lambda = 0 for any non-constant payoff")]
    InvalidLambda(f64),

    #[error("probability level must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("ambiguity radius theta must be finite and >= 0, got {0}")]
    InvalidTheta(f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid search box: lower bound {lo} must be below upper bound {hi}")]
    DegenerateBox { lo: f64, hi: f64 },

    #[error("transport problem has {size} variables, above the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("integrand is not finite at a quadrature node")]
    NonFiniteIntegrand,

    #[error("minimum of the {what} objective still sits at the bracket edge [{lo:e}, {hi:e}] after expansion")]
    BracketFailure { what: &'static str, lo: f64, hi: f64 },

    #[error("transport simplex did not reach optimality after {0} pivots")]
    SimplexStalled(usize),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteIntegrand | Error::BracketFailure { .. } | Error::SimplexStalled(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
