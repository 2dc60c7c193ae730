use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("agent {agent} has a negative utility for item {item}")]
    NegativeUtility { agent: usize, item: usize },

    #[error("utilities of agent {agent} do not sum to 1")]
    NotNormalized { agent: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("item {item} has {bidders} bidders, so there is no necessary outcome")]
    NotUnique { item: usize, bidders: usize },

    #[error("{what} budget of {limit} exceeded")]
    BudgetExceeded { what: &'static str, limit: u64 },

    #[error("the instance has no equilibrium in the searched strategy space")]
    NoEquilibrium,

    #[error("geometric mean is only defined for positive values")]
    NonPositiveValue,

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
