use thiserror::Error;

/// Failures raised by the numerical routines.
///
/// Variants carry the measured quantity that tripped the check so callers can
/// report it without recomputing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has an empty dimension")]
    Empty,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("{what} is not Hermitian (symmetry violation {residual:e})")]
    NotHermitian { what: String, residual: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    Negative { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    InvalidTrace { trace: f64 },

    #[error("tangent is not traceless (trace {trace:e})")]
    NotTraceless { trace: f64 },

    #[error("{op} requires a full-rank base state (rank {rank} < dimension {dim})")]
    RankDeficient { op: &'static str, rank: usize, dim: usize },

    #[error("not a tangent to the fixed-rank manifold (residual {residual:e})")]
    NotATangent { residual: f64 },

    #[error("tangent vectors are attached to different base states")]
    BaseMismatch,

    #[error("rank loss at t = {time}: smallest retained eigenvalue {smallest:e}")]
    RankLoss { time: f64, smallest: f64 },

    #[error("rank changed at t = {time}: {rank} instead of {expected}")]
    RankChange { time: f64, rank: usize, expected: usize },

    #[error("degenerate spectrum at t = {time}: eigenvalue gap {gap:e}")]
    DegenerateSpectrum { time: f64, gap: f64 },

    #[error("ill-conditioned spectral split: {detail}")]
    Conditioning { detail: String },

    #[error("invalid argument `{name}`: {detail}")]
    InvalidArgument { name: &'static str, detail: String },

    #[error("geodesic endpoints coincide (angle {theta:e})")]
    DegeneratePlan { theta: f64 },

    #[error("parameter {tau} outside the geodesic range [0, {theta}]")]
    OutOfRange { tau: f64, theta: f64 },

    #[error("geodesic evolution operator singular at tau = {tau} (condition number {condition:e})")]
    SingularEvolution { tau: f64, condition: f64 },

    #[error("Bloch frame is singular: |z| = {z}")]
    SingularFrame { z: f64 },

    #[error("speed limit undefined: zero average speed between distinct endpoints")]
    ZeroSpeed,

    #[error("eigendecomposition failed to converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;
