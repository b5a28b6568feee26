use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh spec: {0}")]
    InvalidSpec(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("non-finite diagonal symbol value {value} at lambda sum {lambda}")]
    NonFiniteSymbol { lambda: f64, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iteration did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("solution blew up at step {step}")]
    BlowUp { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidOperator(_) => "invalid_operator",
            Error::Shape { .. } => "shape",
            Error::Singular(_) => "singular",
            Error::NonFiniteSymbol { .. } => "non_finite_symbol",
            Error::Precondition(_) => "precondition",
            Error::NotConverged { .. } => "not_converged",
            Error::BlowUp { .. } => "blow_up",
            Error::Config(_) => "config",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        Error::Shape {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
