use thiserror::Error;

/// Errors raised by the numerical engines and the scenario layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frame is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("invalid symplectic space: {0}")]
    InvalidSpace(String),

    #[error("subspace is not Lagrangian ({0})")]
    NotLagrangian(String),

    #[error("operator violates the generator condition U*JU = -J (residual {residual:.3e})")]
    InvalidGenerator { residual: f64 },

    #[error("matrix is not self-adjoint (residual {residual:.3e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("containment violated: {0}")]
    ContainmentViolation(String),

    #[error("eigenvalue {value:.6e} lies within {gap:.1e} of the window boundary {boundary:.6e}")]
    BoundaryCollision { value: f64, boundary: f64, gap: f64 },

    #[error("refinement did not converge on [{s0:.9}, {s1:.9}]: {reason}")]
    NonConvergent { s0: f64, s1: f64, reason: String },

    #[error("eigenvalue tracking is ambiguous on [{s0:.9}, {s1:.9}]")]
    AmbiguousTracking { s0: f64, s1: f64 },

    #[error("crossing at t = {t:.9} is not regular; use the partition engine instead")]
    NonRegularCrossing { t: f64 },

    #[error("t = {t:.9} is not a crossing")]
    NotACrossing { t: f64 },

    #[error("path is not a loop (endpoint gap {gap:.3e})")]
    NotALoop { gap: f64 },

    #[error("eigenvalue {lambda:.6e} sits on the edge of the spectral window; widen the window")]
    WindowEdge { lambda: f64 },

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scenario schema: {0}")]
    Schema(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical engines (refinement, tracking,
    /// integration) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BoundaryCollision { .. }
                | Error::NonConvergent { .. }
                | Error::AmbiguousTracking { .. }
                | Error::NonRegularCrossing { .. }
                | Error::WindowEdge { .. }
                | Error::Integrator(_)
                | Error::Singular(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
