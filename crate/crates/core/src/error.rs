use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "matrix is not skew-Hermitian (symmetrization error {error:.3e} exceeds {tolerance:.1e})"
    )]
    NotSkewHermitian { error: f64, tolerance: f64 },

    #[error("matrix is not unitary (|U^H U - I|_max = {error:.3e} exceeds {tolerance:.1e})")]
    NotUnitary { error: f64, tolerance: f64 },

    #[error("eigendecomposition did not converge (dimension {dim}, max-norm {norm:.6e})")]
    EigenNonConvergence { dim: usize, norm: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation order {order} outside [{min}, {max}]")]
    OrderOutOfRange {
        order: usize,
        min: usize,
        max: usize,
    },

    #[error("coupling matrix asymmetric: |W[{row}][{col}] - W[{col}][{row}]| = {error:.3e}")]
    AsymmetricCoupling { row: usize, col: usize, error: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("quadrature did not stabilize: max entry change {change:.3e} at {nodes} nodes")]
    QuadratureNonConvergence { nodes: usize, change: f64 },

    #[error("degenerate eigenvalues among kept levels: {}", format_collisions(.0))]
    DegenerateSpectrum(Vec<([u32; 3], [u32; 3])>),

    #[error("squared gap of pair {target:?} collides with pairs {colliding:?}")]
    CollidingGaps {
        target: (usize, usize),
        colliding: Vec<(usize, usize)>,
    },

    #[error("coupling entry B[{0}][{1}] is zero")]
    ZeroCoupling(usize, usize),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("phase search failed: no time within horizon {horizon:.3e} reaches target {target:?} (best residual {best_residual:.3e})")]
    PhaseSearchFailed {
        target: Vec<f64>,
        horizon: f64,
        best_residual: f64,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_collisions(pairs: &[([u32; 3], [u32; 3])]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a:?}~{b:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}
