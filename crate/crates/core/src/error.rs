use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them onto
/// exit codes without matching every variant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point ({t}, {tau}) is outside the kernel domain")]
    OutOfDomain { t: f64, tau: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("kernel is not integrable: {0}")]
    NotIntegrable(String),
    #[error("kernel is not square-integrable: {0}")]
    NotSquareIntegrable(String),
    #[error("gamma function pole at {0}")]
    Pole(f64),
    #[error("series did not converge within {terms} terms (last term magnitude {last_term:e})")]
    TruncationFailure { terms: usize, last_term: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("non-finite value produced: {0}")]
    NumericalOverflow(String),
    #[error("derivative blow-up at the {0} endpoint")]
    DerivativeBlowup(&'static str),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("wrong mode: {0}")]
    Mode(String),
    #[error("line search stalled after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Stalled { iterations: usize, gradient_norm: f64 },
    #[error("abnormal case: {0}")]
    AbnormalCase(String),
    #[error("non-invertible: {0}")]
    NonInvertible(String),
    #[error("inconsistent data: {0}")]
    InconsistentData(String),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
}

/// Coarse classification of [`Error`] variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed config, bad parameters, violated preconditions.
    Validation,
    /// The numerics failed on valid input.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidDomain(_)
            | InvalidParameter(_)
            | OutOfDomain { .. }
            | Configuration(_)
            | HypothesisViolation(_)
            | Precondition(_)
            | Mode(_)
            | Parse { .. }
            | Schema(_) => ErrorClass::Validation,
            QuadratureFailure(_)
            | NotIntegrable(_)
            | NotSquareIntegrable(_)
            | Pole(_)
            | TruncationFailure { .. }
            | NumericalOverflow(_)
            | DerivativeBlowup(_)
            | Stalled { .. }
            | AbnormalCase(_)
            | NonInvertible(_)
            | InconsistentData(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
