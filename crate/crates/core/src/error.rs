use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input contains a non-finite coordinate")]
    NonFiniteInput,

    /// An iterate left the representable range (|x_i| > 1e100 or NaN/Inf).
    #[error("state became non-finite at index {index}")]
    NonFiniteState { index: usize },

    #[error("time {t} is outside the interpolation horizon [0, {end}]")]
    OutOfHorizon { t: f64, end: f64 },

    #[error("horizons differ: discrete path ends at {path}, flow ends at {flow}")]
    HorizonMismatch { path: f64, flow: f64 },

    #[error("invalid stability query: {0}")]
    InvalidQuery(String),

    #[error("function `{0}` is not convex")]
    NotConvex(String),

    #[error("point {0:?} lies on the null set x1*x2 = 0")]
    OnNullSet([f64; 2]),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
