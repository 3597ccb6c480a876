use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (entry ({0},{1}))")]
    NotSymmetric(usize, usize),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix has no positive eigenvalue")]
    ZeroMatrix,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("endpoint mismatch: distance {0:e}")]
    EndpointMismatch(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid spin measure: {0}")]
    InvalidMeasure(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("quadrature guard: {nodes} nodes exceeds limit {limit}")]
    QuadratureGuard { nodes: f64, limit: f64 },
    #[error("enumeration guard: {configs} configurations exceeds limit {limit}")]
    EnumerationGuard { configs: f64, limit: f64 },
    #[error("cascade guard: {leaves} leaves per replica exceeds limit {limit}")]
    CascadeGuard { leaves: f64, limit: f64 },
    #[error("divergence: {0}")]
    Divergent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
