use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("recipe infeasible: {0}")]
    RecipeInfeasible(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("c = {0} is not positive")]
    NonPositiveC(f64),

    #[error("beta must be positive to bound the step size")]
    ZeroBeta,

    #[error("negative discriminant {0} under the square root")]
    NegativeDiscriminant(f64),

    #[error("inner prox solve stopped after {iterations} iterations (gradient-map norm {residual:e})")]
    InnerSolveFailed { iterations: usize, residual: f64 },

    #[error("integration diverged at t = {t} (state norm {norm:e})")]
    StepDiverged { t: f64, norm: f64 },

    #[error("iteration diverged at k = {k} (iterate norm {norm:e})")]
    Diverged { k: usize, norm: f64 },

    #[error("sequence of length {len} is too short for a difference of order {order}")]
    LengthTooShort { len: usize, order: usize },

    #[error("xi = {0} is outside the open interval (0, 1)")]
    InvalidXi(f64),

    #[error("empty parameter region: {0}")]
    EmptyRegion(String),

    #[error("reference solution did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("reference solution failed validation: {0}")]
    ValidationFailed(String),

    #[error("degenerate data: every distance is below {floor:e}")]
    DegenerateData { floor: f64 },

    #[error("need at least {needed} usable samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
