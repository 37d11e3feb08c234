//! Error types shared by all modules.

use crate::solver::SolveReport;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which stage of the two-stage fit an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Exposure/covariate -> mediator regressions.
    Mediator,
    /// Mediator/exposure/covariate -> outcome regressions.
    Outcome,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Mediator => write!(f, "mediator stage"),
            Stage::Outcome => write!(f, "outcome stage"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {block} at row {row}, column {col}")]
    NonFiniteInput {
        block: &'static str,
        row: usize,
        col: usize,
    },

    #[error("block {block} has zero columns")]
    EmptyBlock { block: &'static str },

    #[error("block {block} is required for this operation but absent")]
    MissingBlock { block: &'static str },

    #[error("column {col} of {block} has zero l2 norm; cannot scale a constant-zero feature")]
    DegenerateColumn { block: &'static str, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {context} (index {index}, size {size})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        size: usize,
    },

    #[error(
        "coordinate descent did not converge after {} iterations (last sweep change {:.3e})",
        report.iterations,
        report.last_change
    )]
    NoConvergence { report: Box<SolveReport> },

    #[error("design column {col} has zero norm and no ridge penalty; the update is undefined")]
    ZeroNormColumn { col: usize },

    #[error("response column {index}: {source}")]
    Column {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    StageError {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("restricted Gram matrix is numerically singular (min eigenvalue {min_eig:.3e})")]
    SingularGram { min_eig: f64 },

    #[error("the inspected coefficient column has no nonzero entries")]
    EmptySupport,

    #[error("l1 penalty is zero; the 2*lambda2/lambda1 term of the EIC is undefined")]
    ZeroLambda1,

    #[error("direction vector must have unit l2 norm (got {norm})")]
    UnnormalizedDirection { norm: f64 },

    #[error("ground-truth block [{rows:?} x {cols:?}] exceeds matrix bounds ({nrows} x {ncols})")]
    BlockOutOfRange {
        rows: (usize, usize),
        cols: (usize, usize),
        nrows: usize,
        ncols: usize,
    },

    #[error("truth matrix has zero Frobenius norm; NRMSE is undefined")]
    ZeroTruthNorm,

    #[error("bootstrap failed: {failed} of {total} replicates errored")]
    BootstrapFailure { failed: usize, total: usize },

    #[error("penalty grid is empty")]
    GridEmpty,

    #[error("too few rows for {folds}-fold cross-validation (n = {n}, need at least {min})")]
    TooFewRows { n: usize, folds: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn column(index: usize, source: Error) -> Error {
        Error::Column {
            index,
            source: Box::new(source),
        }
    }

    pub(crate) fn stage(stage: Stage, source: Error) -> Error {
        Error::StageError {
            stage,
            source: Box::new(source),
        }
    }

    /// The solve report attached to a `NoConvergence` error, if that is what this is.
    pub fn nonconverged_report(&self) -> Option<&SolveReport> {
        match self {
            Error::NoConvergence { report } => Some(report),
            Error::Column { source, .. } | Error::StageError { source, .. } => {
                source.nonconverged_report()
            }
            _ => None,
        }
    }
}
