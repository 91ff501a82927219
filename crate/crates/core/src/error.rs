use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown leg label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate leg label `{0}`")]
    DuplicateLabel(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("trace {actual} deviates from expected {expected}")]
    TraceDeviation { expected: f64, actual: f64 },

    #[error("support of the first argument is not contained in the support of the second")]
    SupportViolation,

    #[error("elements are not linearly independent (Gram condition number {0:.3e})")]
    SingularGram(f64),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("coin at position {position} is not unitary (residual {residual:.3e})")]
    NonUnitaryCoin { position: i64, residual: f64 },

    #[error("walk produced amplitude at unmapped port ({position}, {coin})")]
    UnexpectedPort { position: i64, coin: u8 },

    #[error("observable lies outside the instrument span (residual {0:.3e})")]
    SpanViolation(f64),

    #[error("measurement settings are not informationally complete")]
    Incomplete,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
