use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimensionError {
    #[error("vector must have at least one coordinate")]
    Empty,
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Mismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("invalid operator: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Problem(#[from] EquilibriumError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory of {requested} records exceeds the in-memory cap of {cap}")]
    TooLong { requested: usize, cap: usize },
}

impl SolverError {
    /// True when the failure came from the approximate maximization oracle.
    pub fn is_oracle_failure(&self) -> bool {
        matches!(
            self,
            SolverError::Problem(EquilibriumError::OracleFailure(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("bound needs about {digits} decimal digits, over the budget of {budget}")]
    SizeOverflow { digits: u64, budget: u64 },
    #[error("recursion depth {depth} exceeds the limit of {limit} levels")]
    IterationLimit { depth: String, limit: u64 },
    #[error("malformed rational {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("no modulus of uniform continuity supplied for index {0}")]
    MissingModulus(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularityError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("index {k} exceeds the recorded horizon {horizon}")]
    HorizonExceeded { k: String, horizon: usize },
    #[error("value of G is not settled by the first {horizon} recorded points")]
    Undecided { horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid check input: {0}")]
    Invalid(String),
}
