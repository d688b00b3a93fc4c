//! Exact-arithmetic homotopy transfer for infinity-algebras.
//!
//! Given a dg algebra (or an infinity-structure presented as a square-zero
//! coderivation on a truncated cofree coalgebra over a nonsymmetric
//! cooperad) and a quasi-isomorphism, this crate constructs the transferred
//! structure and the accompanying infinity-morphism arity by arity, verifies
//! every relation exactly, compares two transferred structures up to
//! isomorphism and coderivation homotopy, and extracts triple Massey
//! products.
//!
//! All arithmetic happens in an exact field: arbitrary-precision rationals
//! or a prime field chosen at runtime. The core is generic over
//! [`field::Field`]; the aliases below fix the two concrete instantiations.

pub mod ainf;
pub mod codercalc;
pub mod cooperad;
pub mod field;
pub mod gradedcx;
pub mod linalg;
pub mod transfer;

pub use field::{Field, GfP, Rational};
pub use gradedcx::{ChainComplex, Degree, GradedMap, GradedModule, Window};
pub use linalg::PivotPolicy;

/// Matrices over the two concrete scalar types.
pub type RationalMatrix = linalg::Matrix<Rational>;
pub type GfpMatrix = linalg::Matrix<GfP>;

/// Chain complexes over the two concrete scalar types.
pub type RationalComplex = ChainComplex<Rational>;
pub type GfpComplex = ChainComplex<GfP>;
