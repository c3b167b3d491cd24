use thiserror::Error;

use crate::confidence::DegreeSearchReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimators, operators and confidence constructions.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point {x} lies outside [0, 1]")]
    OutsideUnitInterval { x: f64 },

    #[error("basis index {index} exceeds degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },

    #[error("degree m = {m} must exceed the derivative order k = {k}")]
    DegreeNotAboveOrder { m: usize, k: usize },

    #[error("forward difference leaves [0, 1]: x + k*h = {end}")]
    DomainOverflow { end: f64 },

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("modulus grid needs at least two points")]
    EmptyGrid,

    #[error("cannot fit a Lipschitz profile: {0}")]
    DegenerateFit(String),

    #[error("binomial coefficient for order {k} overflows exact integer arithmetic")]
    BinomialOverflow { k: usize },

    #[error("x = {x} lies outside the flat window [{lo}, {hi}]")]
    OutsideFlatWindow { x: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {constraint} ({lhs} vs {rhs})")]
    Precondition {
        constraint: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("no degree m <= {} satisfies the selection conditions", .0.m_max)]
    DegreeSearchFailed(Box<DegreeSearchReport>),

    #[error("missing oracle quantity: {0}")]
    MissingOracle(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: cannot parse {content:?} as a number")]
    Malformed { line: usize, content: String },

    #[error("observations outside [0, 1]: {}", format_lines(.0))]
    ValuesOutsideUnit(Vec<(usize, f64)>),

    #[error("no observations")]
    EmptySample,

    #[error("i/o error: {0}")]
    Io(String),
}

fn format_lines(values: &[(usize, f64)]) -> String {
    values
        .iter()
        .map(|(line, v)| format!("line {line}: {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutsideUnitInterval { x })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")))
    }
}
