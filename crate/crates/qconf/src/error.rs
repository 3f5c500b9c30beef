use thiserror::Error;

/// Unified error type for the whole library.
///
/// Variants are grouped by the layer that raises them; `class` maps each
/// variant onto the coarse classes the CLI turns into exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    // scalar layer
    #[error("variable {0} has no assigned value")]
    MissingVariable(String),
    #[error("denominator evaluates to a near-zero value (|den| = {0})")]
    NearZeroDenominator(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("principal power of zero base")]
    ZeroBase,

    // series layer
    #[error("scalar fields of the operands do not match: {0}")]
    FieldMismatch(String),
    #[error("leading coefficient is not a unit; cannot invert series")]
    NonUnitLeadingCoefficient,
    #[error("q = 1 is outside the domain of delta_q")]
    QEqualsOne,

    // special functions
    #[error("|q| must be strictly less than 1 (got |q| = {0})")]
    ModulusQNotLessThanOne(String),
    #[error("theta window M = {m} leaves tail bound {bound} above tolerance {tol}")]
    WindowTooSmall { m: i64, bound: String, tol: String },
    #[error("Q is within the guard distance of a zero of theta ({0})")]
    NearThetaZero(String),
    #[error("Q lies on the excluded spiral through -1 ({0})")]
    SpiralCut(String),

    // rings
    #[error("equivariant parameters coincide: {0}")]
    CoincidingEquivariantParameters(String),
    #[error("class has no non-equivariant limit (fixed-point basis degenerates): {0}")]
    DegenerateBasis(String),

    // J-functions and operators
    #[error("resonant parameters: {0}")]
    ResonantParameters(String),
    #[error("series truncation order too short for the requested operation")]
    TruncationTooShort,
    #[error("leading operator coefficient vanishes")]
    LeadingCoefficientVanishes,
    #[error("operator coefficient diverges along the t-grid: {0}")]
    DivergentCoefficient(String),

    // linear algebra
    #[error("matrix is singular")]
    SingularMatrix,

    // systems
    #[error("gauge matrix is singular")]
    SingularGauge,
    #[error("pullback scale is zero")]
    ZeroScale,
    #[error("declared poles lie on a common q-spiral: {0}")]
    PolesOnCommonSpiral(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("non-semisimple constant part; Jordan case unsupported: {0}")]
    JordanCaseUnsupported(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid input domain (poles, resonance, coinciding parameters, ...).
    Domain,
    /// A limit that was expected to exist did not stabilize.
    Convergence,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoConvergence(_) | Error::DivergentCoefficient(_) => ErrorClass::Convergence,
            _ => ErrorClass::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
