//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while building or reading datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    MalformedCsv { path: String, message: String },
    #[error("missing value at row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },
    #[error("non-numeric covariate '{value}' at row {row}, column '{column}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("response column '{0}' not found in header")]
    MissingResponseColumn(String),
    #[error("binary response outside {{0,1}} at row {row}: {value}")]
    BinaryOutOfRange { row: usize, value: f64 },
    #[error("nonpositive survival time at row {row}: {value}")]
    NonPositiveTime { row: usize, value: f64 },
    #[error("survival status outside {{0,1}} at row {row}: {value}")]
    StatusOutOfRange { row: usize, value: f64 },
    #[error("binary response must contain at least one 0 and one 1")]
    DegenerateBinary,
    #[error("survival response must contain at least one event")]
    NoEvents,
    #[error("need at least 2 rows and 1 covariate, got n={n}, p={p}")]
    TooSmall { n: usize, p: usize },
    #[error("non-finite covariate value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("duplicate predictor name '{0}'")]
    DuplicateName(String),
    #[error("self-loop at predictor {0}")]
    SelfLoop(usize),
    #[error("graph index {index} out of range for p={p}")]
    GraphIndexOutOfRange { index: usize, p: usize },
    #[error("malformed graph line {line}: '{content}'")]
    MalformedGraphLine { line: usize, content: String },
    #[error("constant column '{0}' cannot be standardized")]
    ConstantColumn(String),
}

/// Errors raised by model fitting.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("family {family} incompatible with {response} response")]
    FamilyMismatch {
        family: &'static str,
        response: &'static str,
    },
    #[error("ising prior requires a predictor graph")]
    MissingGraph,
    #[error("supplied initial coefficients have length {got}, expected {expected}")]
    BadInitLength { got: usize, expected: usize },
    #[error("non-finite pseudodata encountered at outer iteration {iter}")]
    NonFinitePseudodata { iter: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}
