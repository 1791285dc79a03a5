//! Symbolic calculus for local and non-local Poisson vertex algebras over
//! algebras of differential polynomials: lambda-brackets via the Master
//! Formula, Dirac modification and reduction of Poisson structures by
//! constraints, verification of the PVA axioms, and the Lenard-Magri
//! bi-Hamiltonian recursion — all in exact rational arithmetic.
//!
//! The crate ships a worked minimal-nilpotent `sl3` model (generators
//! `L, psip, psim, phi`) as built-in ground truth; see the `sl3` module and
//! the `pvadirac` command-line tool.

pub mod cli;
pub mod diffring;
pub mod dirac;
pub mod expr;
pub mod hierarchy;
pub mod model;
pub mod psdo;
pub mod pva;
pub mod rat;
pub mod series;
pub mod sl3;

#[cfg(test)]
pub(crate) mod testutil;

pub use diffring::{Algebra, AlgebraDescriptor, ConstraintContext, DiffFrac, DiffPoly};
pub use psdo::{FractionPair, MatrixOp, PseudoOp};

pub use series::{DoubleSeries, LambdaSeries};
