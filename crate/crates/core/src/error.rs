use thiserror::Error;

/// Failures while evaluating a field at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates, field expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate index {0} is not part of the chart")]
    MissingCoordinate(usize),
    #[error("coordinate {0} is not finite")]
    NonFiniteCoordinate(usize),
    #[error("coordinate {coord} = {value} lies outside the domain box")]
    OutsideDomain { coord: usize, value: f64 },
    #[error("finite-difference step {step} in coordinate {coord} leaves the domain box")]
    BoundaryProximity { coord: usize, step: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{op} of non-positive value {value}")]
    NonPositiveBase { op: &'static str, value: f64 },
    #[error("non-finite result")]
    NonFinite,
    #[error("exact derivatives are unavailable for opaque fields")]
    ExactModeUnavailable,
}

/// Failures while parsing an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character '{ch}' at offset {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("malformed number '{text}' at offset {pos}")]
    BadNumber { pos: usize, text: String },
    #[error("unknown symbol '{name}' at offset {pos}")]
    UnknownSymbol { pos: usize, name: String },
    #[error("expected {what} at offset {pos}")]
    Expected { pos: usize, what: &'static str },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("trailing input at offset {pos}")]
    Trailing { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{context}: {source}")]
    EvalAt {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("frame matrix is singular at the base point")]
    SingularFrame,
    #[error("base metric is not positive definite")]
    MetricNotPositive,
    #[error("conformal factor sigma = {0} is not positive")]
    SigmaNotPositive(f64),
    #[error("alpha vanishes at the point")]
    AlphaZero,
    #[error("transversal coefficient a vanishes")]
    TransversalDegenerate,
    #[error(
        "sigma is not identically 1 at the point (value {value}, max derivative {derivative})"
    )]
    SigmaNotUnit { value: f64, derivative: f64 },
    #[error("assembled metric is singular (internal inconsistency)")]
    SingularMetric,
    #[error("bracket table deviates from coordinate brackets by {0}: potential is inconsistent with the Kahler form")]
    InconsistentPotential(f64),
    #[error("unknown check '{0}'")]
    UnknownCheck(String),
    #[error("invalid label '{0}'")]
    InvalidLabel(String),
    #[error("at sample point {point}: {source}")]
    PointFailure {
        point: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(context: impl Into<String>, source: EvalError) -> Self {
        Error::EvalAt {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
