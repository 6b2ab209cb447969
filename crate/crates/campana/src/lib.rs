//! Exact counting of rational and Campana curves on smooth split projective
//! toric varieties over finite fields.
//!
//! The library has two independent halves that must agree:
//!
//! * a brute-force side ([`ffcount`]) that enumerates morphisms
//!   `P^1 -> X_Sigma` in Cox coordinates (tuples of binary forms without
//!   common zeros along primitive collections, modulo the Néron–Severi
//!   torus), optionally filtered by Campana multiplicity conditions;
//! * a prediction side ([`euler`], [`predict`]) that expands the associated
//!   Möbius and admissibility series into Euler products over the curve and
//!   extracts expected counts, normalised values and limit constants.
//!
//! All arithmetic is exact: coefficients live in a Laurent-polynomial
//! specialisation of the Grothendieck ring of varieties ([`gring::MotClass`])
//! or in `Q[x]/(x^r - q)` ([`gring::AlgNumber`]) after counting
//! specialisation.

pub mod curve;
pub mod error;
pub mod euler;
pub mod fan;
pub mod ffcount;
pub mod gring;
pub mod mvseries;
pub mod predict;
pub mod verify;

pub use error::Error;

/// Exact rational scalar used throughout the crate.
pub type Rat = num::BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    use num::BigInt;
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Convenience constructor for integer rationals.
pub fn rat_int(n: i64) -> Rat {
    use num::BigInt;
    Rat::from_integer(BigInt::from(n))
}
