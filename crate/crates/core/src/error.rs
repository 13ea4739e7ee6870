use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("unknown constellation kind `{0}`")]
    UnknownConstellation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} produced at iteration {iteration} of {context}")]
    NonFinite {
        context: &'static str,
        iteration: usize,
        value: f64,
    },

    #[error("{context} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("rate loss undefined: reference rate {reference} is not positive")]
    UndefinedLoss { reference: f64 },

    #[error("rate loss is not monotone in EVM: {0}")]
    NonMonotoneLoss(String),

    #[error("alphabet too large for exhaustive enumeration: |A|^M = {size} exceeds {limit}")]
    AlphabetTooLarge { size: u128, limit: u128 },

    #[error("singular or indefinite matrix in {0}")]
    Singular(&'static str),
}
