use thiserror::Error;

/// Errors raised by the numerical constructions and their verification gates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NonHermitian { residual: f64 },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Gram matrix is singular")]
    SingularGram,
    #[error("null space is not invariant under the action (residual {residual:e})")]
    SubmoduleViolation { residual: f64 },
    #[error("map does not preserve the null space (residual {residual:e})")]
    WellDefinednessViolation { residual: f64 },
    #[error("map is not completely positive (min Choi eigenvalue {min_eigenvalue:e})")]
    NotCp { min_eigenvalue: f64 },
    #[error("map images are not linear over the coefficient algebra (residual {residual:e})")]
    NonLinearMap { residual: f64 },
    #[error("twist of the map does not match the requested automorphism (residual {residual:e})")]
    TwistMismatch { residual: f64 },
    #[error("morphisms are not composable: {0}")]
    ObjectMismatch(String),
    #[error("input path does not converge (final distance {final_distance:e})")]
    NonConvergentInput { final_distance: f64 },
    #[error("spanning rank {rank} is below module dimension {dim}")]
    SpanningFailure { rank: usize, dim: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
