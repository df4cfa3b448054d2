use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree {degree} exceeds the cap of {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contraction order {r} exceeds min({k}, {j})")]
    ContractionRange { r: usize, k: usize, j: usize },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("not an eigenfunction for eigenvalue {eigenvalue}: residual {residual:e}")]
    NotEigenfunction { eigenvalue: f64, residual: f64 },

    #[error("(H2) violated: X^2 has spectral mass at eigenvalue {eigenvalue} > {limit}")]
    H2Violation { eigenvalue: f64, limit: f64 },

    #[error("vector field is not in the range of D: {0}")]
    NotAGradient(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigRange { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("case {case}: {source}")]
    Case { case: String, source: Box<Error> },
}

impl Error {
    /// True for errors caused by the configuration rather than the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::ConfigParse { .. } | Error::ConfigRange { .. })
    }

    pub(crate) fn in_case(self, case: impl Into<String>) -> Self {
        Error::Case {
            case: case.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
