use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature covariance is singular (lambda_min = {0:e})")]
    SigmaSingular(f64),
    #[error("A matrix is singular (sigma_min = {0:e})")]
    AMatrixSingular(f64),
    #[error("abstract state {0} has zero mass under mu")]
    UnsupportedAbstractState(usize),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("search exhausted after {0} trials")]
    SearchExhausted(u64),
    #[error("fixed-point iteration did not converge: {0}")]
    FixedPointDivergence(String),
    #[error("bisection failed: {0}")]
    BisectionFailure(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable identifier, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SigmaSingular(_) => "sigma_singular",
            Error::AMatrixSingular(_) => "a_singular",
            Error::UnsupportedAbstractState(_) => "unsupported_abstract_state",
            Error::Domain(_) => "domain",
            Error::SearchExhausted(_) => "search_exhausted",
            Error::FixedPointDivergence(_) => "fixed_point_divergence",
            Error::BisectionFailure(_) => "bisection_failure",
            Error::Parse { .. } => "parse",
            Error::Dimension(_) => "dimension",
            Error::Invariant(_) => "invariant",
        }
    }
}
