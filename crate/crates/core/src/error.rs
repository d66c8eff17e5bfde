use thiserror::Error;

use crate::integrator::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace deviates from 1 by {0:e}")]
    TraceDeviation(f64),

    #[error("negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a declared bipartite subsystem partition")]
    PartitionUndeclared,

    #[error("invalid system model: {0}")]
    InvalidModel(String),

    #[error("exponent spread {0:e} exceeds the overflow guard")]
    OverflowGuard(f64),

    #[error("infeasible targets: {0}")]
    Infeasible(String),

    #[error("Gibbs solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("operator is not idempotent (‖B²−B‖ = {0:e})")]
    NotIdempotent(f64),

    #[error("projector does not commute with the conserved operators (‖[B,X]‖ = {0:e})")]
    NotCommuting(f64),

    #[error("invalid dynamics specification: {0}")]
    InvalidDynamics(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step size underflow at t = {t} (dt = {dt:e}): {diagnosis}")]
    StepUnderflow {
        t: f64,
        dt: f64,
        diagnosis: String,
        partial: Box<Trajectory>,
    },

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error("step limit of {0} exceeded")]
    StepLimit(usize),

    #[error("probe ensemble spans {rank} affinity directions, {required} required")]
    DegenerateProbeEnsemble { rank: usize, required: usize },

    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
