use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("assignment length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("assignment contains err symbols where {{T,F}} was required")]
    ErrSymbolPresent,
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("rule failed at vertex {vertex}: {message}")]
    RuleFailure { vertex: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
