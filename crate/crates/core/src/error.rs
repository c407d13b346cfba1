use thiserror::Error;

/// Every fallible operation in the library reports one of these.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is reducible")]
    ReducibleModulus(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("elements from different field contexts were combined")]
    ContextMismatch,
    #[error("zero has no multiplicative order or inverse")]
    ZeroElement,
    #[error("{n} does not divide {q_minus_1}; smallest extension degree giving an order-{n} element: {suggestion}")]
    NoRootOfUnity {
        n: u64,
        q_minus_1: u64,
        suggestion: String,
    },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid network: {0}")]
    Network(String),
    #[error("no LEC value for {0}")]
    ScheduleGap(String),
    #[error("randomized test could not find a point with nonzero denominator; enlarge the field")]
    FieldTooSmall,
    #[error("malformed demands: {0}")]
    MalformedDemands(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error("cancellation rule failed: {0}")]
    Cancellation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            line: 1,
            column: 1,
            msg: msg.into(),
        }
    }
}
