use std::fmt;

use crate::polybasis::MultiIndex;

/// Structural problem found in a generator specification.
///
/// Violations are data, not errors: `GeneratorSpec::validate` returns all of
/// them at once so a caller can report a complete diagnosis.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A stored coefficient matrix is not exactly symmetric.
    AsymmetricMatrix { which: String },
    /// The diffusion a(x) has a negative eigenvalue at a state-space grid point.
    NotPositiveSemidefinite {
        point: Vec<f64>,
        eigenvalue: f64,
    },
    /// A linear jump table is attached to a coordinate i with S_i ⊄ R_+.
    LinearJumpIndexNotAdmissible { coordinate: usize },
    /// A quadratic jump table is attached to a pair (i,j) outside the admissible set.
    QuadraticJumpIndexNotAdmissible { i: usize, j: usize },
    /// A jump moment table is missing an entry it declares to cover.
    IncompleteJumpTable { which: String, missing: MultiIndex },
    /// An even pure jump moment ∫ξ_i^{2p} μ(dξ) is negative.
    NegativeEvenMoment {
        which: String,
        index: MultiIndex,
        value: f64,
    },
    /// Vector/matrix sizes disagree with the state dimension.
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    /// An interval coordinate has lo ≥ hi.
    EmptyInterval { coordinate: usize, lo: f64, hi: f64 },
    /// A drift/diffusion entry is NaN or infinite.
    NonFiniteEntry { which: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AsymmetricMatrix { which } => {
                write!(f, "matrix {which} is not exactly symmetric")
            }
            Violation::NotPositiveSemidefinite { point, eigenvalue } => write!(
                f,
                "diffusion a(x) has eigenvalue {eigenvalue:e} < 0 at grid point {point:?}"
            ),
            Violation::LinearJumpIndexNotAdmissible { coordinate } => write!(
                f,
                "linear jump table on coordinate {coordinate}: state projection is not contained in R+"
            ),
            Violation::QuadraticJumpIndexNotAdmissible { i, j } => write!(
                f,
                "quadratic jump table on pair ({i},{j}): projections are not jointly in R+^2 or R-^2"
            ),
            Violation::IncompleteJumpTable { which, missing } => {
                write!(f, "jump table {which} is missing moment {missing}")
            }
            Violation::NegativeEvenMoment {
                which,
                index,
                value,
            } => write!(
                f,
                "jump table {which}: even moment {index} is negative ({value:e})"
            ),
            Violation::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected dimension {expected}, found {found}"),
            Violation::EmptyInterval { coordinate, lo, hi } => {
                write!(f, "coordinate {coordinate}: interval [{lo},{hi}] is empty")
            }
            Violation::NonFiniteEntry { which } => {
                write!(f, "{which} contains a non-finite entry")
            }
        }
    }
}

/// Library error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// State-space or coefficient dimensions disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// A polynomial operation would exceed the target basis degree.
    DegreeOverflow { degree: u32, max: u32 },
    /// The requested basis has more elements than the configured cap.
    BasisTooLarge { dim: usize, max_degree: u32 },
    /// Multi-index outside the basis (degree too high or wrong dimension).
    IndexOutOfBasis { index: MultiIndex },
    /// Two polynomial/matrix operands live over different bases.
    BasisMismatch,
    /// A jump moment table does not cover the requested degree.
    MissingJumpMoment { index: MultiIndex },
    /// The specification failed validation.
    InvalidSpec(Vec<Violation>),
    /// A user-supplied parameter is outside its documented range.
    InvalidParameter(String),
    /// An input contains NaN or infinity.
    NonFinite(String),
    /// A numerical procedure failed (singular solve, divergence, ...).
    Numerical(String),
    /// The generator does not strictly lower polynomial degree.
    DegreeNotLowered { monomial: MultiIndex },
    /// Observed market value outside the image of the market map.
    OutsideMarketMap { coordinate: usize, value: f64 },
    /// Least-squares design is rank deficient even after regularization.
    RankDeficient { condition: f64 },
    /// Calibration objective is not finite at the starting point.
    NonFiniteObjective,
    /// Time series shorter than the largest requested lag.
    SeriesTooShort { needed: usize, len: usize },
    /// No mean reversion: stationary moments are not defined.
    NoMeanReversion(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::DegreeOverflow { degree, max } => write!(
                f,
                "degree overflow: result has degree {degree}, basis only holds {max}"
            ),
            Error::BasisTooLarge { dim, max_degree } => write!(
                f,
                "basis for n={dim}, m={max_degree} exceeds the supported size"
            ),
            Error::IndexOutOfBasis { index } => {
                write!(f, "multi-index {index} is not an element of the basis")
            }
            Error::BasisMismatch => write!(f, "operands are defined over different bases"),
            Error::MissingJumpMoment { index } => {
                write!(f, "jump moment table has no entry for {index}")
            }
            Error::InvalidSpec(violations) => {
                write!(f, "specification is invalid:")?;
                for v in violations {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite input: {what}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::DegreeNotLowered { monomial } => write!(
                f,
                "generator does not lower degree: image of {monomial} has degree >= its own"
            ),
            Error::OutsideMarketMap { coordinate, value } => write!(
                f,
                "value {value} on coordinate {coordinate} is outside the market map image"
            ),
            Error::RankDeficient { condition } => write!(
                f,
                "design matrix is rank deficient (condition estimate {condition:e})"
            ),
            Error::NonFiniteObjective => {
                write!(f, "calibration objective is not finite at the start point")
            }
            Error::SeriesTooShort { needed, len } => write!(
                f,
                "time series has {len} observations; at least {needed} are required"
            ),
            Error::NoMeanReversion(msg) => write!(f, "no mean reversion: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
