use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("minimal polynomial is empty")]
    EmptyPolynomial,
    #[error("minimal polynomial is not monic (leading coefficient {0})")]
    NonMonic(String),
    #[error("minimal polynomial has repeated roots (gcd with derivative has degree {0})")]
    RepeatedRoots(usize),
    #[error("roots are ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("basis matrix is singular")]
    SingularBasis,
    #[error("basis has vanishing discriminant ({0:e})")]
    DegenerateBasis(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding index {0} out of range")]
    BadEmbedding(usize),
    #[error("embedding {0} is real; a complex embedding is required")]
    RealEmbedding(usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("polynomial must be univariate (n = 1), got n = {0}")]
    NotUnivariate(usize),
    #[error("dimension {0} too large (at most {1})")]
    DimensionTooLarge(usize, usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("embedding set is empty")]
    EmptySet,
    #[error("embedding set is not closed under conjugation (missing {0})")]
    NotConjugationClosed(usize),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("cover incomplete: {0} grid points uncovered")]
    CoverIncomplete(usize),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("polynomial vanishes identically")]
    DegenerateQ,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("field is not totally real")]
    NotTotallyReal,
    #[error("no admissible points: {0}")]
    EmptyRegion(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("experiment failed: {0}")]
    ExperimentFailed(String),
    #[error("calibration unstable: {0}")]
    CalibrationUnstable(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
