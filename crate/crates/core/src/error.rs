use thiserror::Error;

/// Errors raised while ingesting models or running analytics on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative weight {value} in {location}")]
    NegativeWeight { location: String, value: f64 },

    #[error("missing symbol: {0}")]
    MissingSymbol(String),

    #[error("{0} is the zero vector")]
    ZeroVector(&'static str),

    #[error("matrix of symbol '{0}' has no positive entry")]
    ZeroMatrix(String),

    #[error("the total weight matrix is not primitive")]
    NotPrimitive,

    #[error("invalid DFA: {0}")]
    InvalidDfa(String),

    #[error("exp(t[{index}]) is not representable for t[{index}] = {value}")]
    Overflow { index: usize, value: f64 },

    #[error("eigen-iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate value: {0}")]
    DegenerateValue(String),

    #[error("budget exceeded: {required} cells required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable code, used on the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedInput(_) => "MALFORMED_INPUT",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::NegativeWeight { .. } => "NEGATIVE_WEIGHT",
            Error::MissingSymbol(_) => "MISSING_SYMBOL",
            Error::ZeroVector(_) => "ZERO_VECTOR",
            Error::ZeroMatrix(_) => "ZERO_MATRIX",
            Error::NotPrimitive => "NOT_PRIMITIVE",
            Error::InvalidDfa(_) => "INVALID_DFA",
            Error::Overflow { .. } => "OVERFLOW",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::DegenerateValue(_) => "DEGENERATE_VALUE",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
