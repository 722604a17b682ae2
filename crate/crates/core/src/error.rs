use std::path::PathBuf;

/// Errors produced by mesh construction, assembly, solves and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate triangle: area {area:e} relative to diameter {diameter:e}")]
    DegenerateTriangle { area: f64, diameter: f64 },

    #[error("point lies {distance:e} off the triangle plane")]
    OffPlane { distance: f64 },

    #[error("point is too close to the projection pole (1 - z = {gap:e})")]
    NearPole { gap: f64 },

    #[error("point is not on the unit sphere (|v| = {norm})")]
    NotOnSphere { norm: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("non-finite weight on edge ({0}, {1})")]
    NonFiniteWeight(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear system is singular beyond the constant gauge (is the mesh connected?)")]
    SingularBeyondGauge,

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("reference map has zero norm")]
    ZeroReference,

    #[error("Beltrami coefficient is not strictly inside the unit disk (1 - |mu|^2 = {0:e})")]
    DegenerateCoefficient(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
