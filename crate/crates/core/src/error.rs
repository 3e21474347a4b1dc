use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains a non-finite value at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no singular value reaches sqrt(gamma): gamma = {gamma}, largest sigma^2 = {top}")]
    EmptySpectrum { gamma: f64, top: f64 },

    #[error("all leverage scores are zero")]
    ZeroLeverage,

    #[error("all covariate rows are zero; use phi = 1 for pure randomization")]
    ZeroCovariates,

    #[error("cannot normalize an all-zero matrix")]
    ZeroMatrix,

    #[error("oracle violation: unit {unit} already revealed its other arm")]
    OracleViolation { unit: usize },

    #[error("walk left the smaller side empty on a set of {size} units after {attempts} attempts")]
    DegeneratePartition { size: usize, attempts: usize },

    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("Cholesky factorization failed: {0}")]
    CholeskyFailure(&'static str),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ground-truth treatment effect is unavailable")]
    MissingGroundTruth,

    #[error("no records to summarize")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors that come from a design degenerating on otherwise valid input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegeneratePartition { .. } | Error::EmptySpectrum { .. } | Error::ZeroLeverage
        )
    }
}
