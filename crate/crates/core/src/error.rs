use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row not stochastic at (state {state}, action {action}): sum = {sum}")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },
    #[error("negative transition probability at (state {state}, action {action}) -> {next_state}")]
    NegativeProbability {
        state: usize,
        action: usize,
        next_state: usize,
    },
    #[error("discount must be < 1 (got {0})")]
    BadDiscount(f64),
    #[error("non-finite reward at (state {state}, action {action})")]
    NonFiniteReward { state: usize, action: usize },
    #[error("non-finite value at (state {state}, action {action})")]
    NonFiniteValue { state: usize, action: usize },
    #[error("policy row {state} is not a distribution (sum = {sum})")]
    BadPolicyRow { state: usize, sum: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("empty support at state {0}")]
    EmptySupport(usize),
    #[error("empty mask in log-sum-exp")]
    EmptyMask,
    #[error("temperature must be strictly positive (got {0})")]
    BadTemperature(f64),
    #[error("sampled action {action} has zero behavior probability")]
    ZeroProbabilitySample { action: usize },
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no transitions")]
    NoTransitions,
    #[error("backward called without a recorded forward pass")]
    NoForward,
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
