use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by construction and solver entry points.
///
/// Report-style operations (verifiers, diagnostics) do not error; they return
/// reports whose fields say what was violated.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point, query or measure had the wrong dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// A measure had no atoms.
    EmptyMeasure,
    /// A weight was negative.
    NegativeWeight { index: usize, weight: f64 },
    /// Weights summed to zero (or below), so they cannot be normalized.
    ZeroTotalWeight,
    /// Length of a paired input did not match.
    LengthMismatch { expected: usize, got: usize },
    /// A scalar parameter was outside its domain.
    InvalidParameter(&'static str),
    /// Blur requested on a measure whose dimension is not a perfect square.
    NonSquareDim(usize),
    /// The oracle was asked for an instance outside its contract.
    OracleContract(&'static str),
    /// The simplex failed to terminate within its pivot budget. Internal;
    /// must not occur for finite inputs.
    SolverStalled { pivots: usize },
    /// Gradient requested at a point coinciding with a potential atom.
    AtAtom { atom: usize },
    /// Ray geometry requested at a nondifferentiable (tie) point.
    Nondifferentiable { gap: f64 },
    /// A TTC precondition on the fit schedule failed.
    BadSchedule(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::EmptyMeasure => write!(f, "measure must contain at least one atom"),
            Error::NegativeWeight { index, weight } => {
                write!(f, "weight {index} is negative ({weight})")
            }
            Error::ZeroTotalWeight => write!(f, "weights sum to zero"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NonSquareDim(d) => {
                write!(f, "blur needs square images, but dim {d} is not a perfect square")
            }
            Error::OracleContract(what) => write!(f, "oracle contract violated: {what}"),
            Error::SolverStalled { pivots } => {
                write!(f, "transportation simplex did not terminate after {pivots} pivots")
            }
            Error::AtAtom { atom } => {
                write!(f, "gradient undefined: point coincides with atom {atom}")
            }
            Error::Nondifferentiable { gap } => {
                write!(f, "potential nondifferentiable here (tie gap {gap:e})")
            }
            Error::BadSchedule(what) => write!(f, "bad fit schedule: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
