//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed fan document: {0}")]
    FanDocument(String),
    #[error("ray {index} is not primitive: {ray:?}")]
    NonPrimitiveRay { index: usize, ray: Vec<i64> },
    #[error("ray {index} is zero")]
    ZeroRay { index: usize },
    #[error("rays {first} and {second} are equal")]
    DuplicateRay { first: usize, second: usize },
    #[error("maximal cone {index} has {got} rays, expected {expected}")]
    ConeWrongSize {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("cone {cone} references ray index {ray} out of range")]
    RayIndexOutOfRange { cone: usize, ray: usize },
    #[error("cone {index} repeats a ray index")]
    RepeatedRayInCone { index: usize },
    #[error("fan has no maximal cones")]
    NoCones,
    #[error("fan validation failed: {0}")]
    InvalidFan(String),
    #[error("Picard lattice has torsion (invariant factor {0} != 1)")]
    TorsionPicard(i64),
    #[error("rays do not span the ambient lattice")]
    RaysDoNotSpan,

    #[error("denominator of {0} does not divide root order {1}")]
    IncompatibleRoot(String, u32),
    #[error("cannot parse '{0}' as a ring element")]
    ParseClass(String),
    #[error("{0} is not a prime power supported by the field tables")]
    UnsupportedField(u64),

    #[error("series variable count mismatch: {0} vs {1}")]
    VariableMismatch(usize, usize),
    #[error("constant term {0} is not a unit")]
    NonUnitConstant(String),
    #[error("series operation needs a truncation bound but both operands are exact")]
    NoTruncation,
    #[error("geometric decomposition hit a non-integer multiplicity {0} at {1:?}")]
    NonIntegerMultiplicity(String, Vec<u32>),
    #[error("series diverges at the requested point (margin {0} >= 1)")]
    Divergent(String),
    #[error("nonpositive pairing <alpha,{0:?}> with a nonzero coefficient")]
    NonPositivePairing(Vec<u32>),
    #[error("local factor has a coefficient with fractional L-exponent; cannot specialise")]
    FractionalExponent,

    #[error("invalid curve model: {0}")]
    InvalidCurve(String),
    #[error("negative closed-point count B_{0} = {1} (model invalid at this q)")]
    NegativePointCount(u32, String),
    #[error("h0 is ambiguous for genus {genus} in degree {degree}")]
    AmbiguousH0 { genus: u32, degree: i64 },
    #[error("numerator does not specialise to an integer at q={0}")]
    NonIntegralNumerator(u64),

    #[error("multidegree has wrong length: {0}, expected {1}")]
    DegreeLength(usize, usize),
    #[error("multiplicities must be >= 1")]
    InvalidMultiplicity,
    #[error("multidegree {0:?} is not admissible for this fan")]
    NonAdmissible(Vec<u32>),
    #[error("closed-point table too shallow (degree {0}) for this factorisation")]
    TableTooShallow(usize),
    #[error("tuple space of size {0} exceeds the budget of {1}")]
    BudgetExceeded(u128, u128),
    #[error("wall-clock budget of {0} s exceeded")]
    TimeBudgetExceeded(u64),
    #[error("raw count {0} not divisible by (q-1)^{1} = {2}; internal counting bug")]
    TorusDivisibility(u128, u32, u128),
    #[error("oracle mismatch: forms give {forms}, divisors give {divisors}")]
    OracleMismatch { forms: u128, divisors: u128 },

    #[error("element is not invertible in Q[x]/(x^{0} - {1})")]
    NotInvertible(u32, u64),
    #[error("truncation bound {0} is too small (need at least {1})")]
    BoundTooSmall(u32, u32),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
