use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsiError {
    #[error("empty tensor")]
    EmptyTensor,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("promise violated: states are neither equal nor orthogonal")]
    PromiseViolated,
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl QsiError {
    pub fn is_cap(&self) -> bool {
        matches!(self, QsiError::CapExceeded(_))
    }
}

pub type Result<T> = std::result::Result<T, QsiError>;
