use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("field has {got} nodal values but the mesh has {expected} nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("gradient requested for an expression field; interpolate onto the mesh first")]
    ExpressionGradient,

    #[error("exponent p = {0} outside the supported range [1, 16]")]
    InvalidExponent(f64),

    #[error("weight is negative ({value:e}) at {point:?}")]
    NegativeWeight { point: Vec<f64>, value: f64 },

    #[error("integrand diverges: {0}")]
    Divergent(String),

    #[error("non-finite value {value} of {what} at {point:?}")]
    NonFinite {
        what: &'static str,
        point: Vec<f64>,
        value: f64,
    },

    #[error("mesh has no interior degrees of freedom")]
    EmptySystem,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stiffness matrix is not positive definite (pivot {pivot:e} at row {row}); the weight likely fails the n^-2 integrability certificate")]
    NonCoercive { row: usize, pivot: f64 },

    #[error("iteration did not converge after {iterations} steps (residuals {residuals:?})")]
    NotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("requested {requested} eigenpairs but only {available} degrees of freedom exist")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("time series is empty")]
    EmptySeries,

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
}
