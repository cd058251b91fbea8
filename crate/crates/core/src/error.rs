use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-convergent: {0}")]
    NonConvergent(String),
    #[error("invalid rank {0}")]
    InvalidRank(usize),
    #[error("truncation order too small")]
    TruncationTooSmall,
    #[error("not in the Weyl group of D_l: {0}")]
    NotInWeylGroup(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("algebra mismatch")]
    AlgebraMismatch,
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("defective monodromy (eigenvector condition number {0:.3e})")]
    DefectiveMonodromy(f64),
    #[error("not special orthogonal: {0}")]
    NotSpecialOrthogonal(String),
    #[error("zero mode: twisted operator has a kernel")]
    ZeroMode,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
