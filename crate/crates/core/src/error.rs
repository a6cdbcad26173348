use crate::manifold::ManifoldId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("manifold mismatch: expected {expected}, found {found}")]
    ManifoldMismatch { expected: ManifoldId, found: ManifoldId },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("eigenvalue {0} is not in the retained spectrum")]
    UnknownEigenvalue(f64),

    #[error("filter construction rejected: {0}")]
    FilterRejected(String),

    #[error("path count {count} exceeds cap {cap}")]
    PathCap { count: u128, cap: usize },

    #[error("filter index {index} out of range for a bank with {len} high-pass filters")]
    PathIndex { index: usize, len: usize },

    #[error("not computable: {0}")]
    NotComputable(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
