use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("all rows were filtered out")]
    EmptyAfterFilter,

    #[error("invalid split specification: {0}")]
    InvalidSplit(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("observation {0} has no available alternative")]
    NoAvailableAlternative(usize),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("category `{label}` not found for variable `{variable}`")]
    UnknownCategory { variable: String, label: String },

    #[error("variable `{0}` is degenerate (zero variance)")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no encoder supplied for variable `{0}`")]
    MissingEncoder(String),

    #[error("column label `{0}` is used twice")]
    LabelCollision(String),

    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("negative Hessian is not positive definite at the optimum (iteration {iterations})")]
    SingularHessian { iterations: usize },

    #[error("training diverged (non-finite loss) for seed {seed} in epoch {epoch}")]
    Diverged { seed: u64, epoch: usize },

    #[error("all {0} training runs diverged")]
    AllRunsDiverged(usize),

    #[error("propagated variance {0} is negative")]
    NegativeVariance(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
