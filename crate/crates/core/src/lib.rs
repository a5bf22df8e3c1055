//! Finite-dimensional construction of hyperinvariant subspaces for compact
//! perturbations `T = M_f + K` of multiplication (diagonal) operators.
//!
//! The crate builds, on a discretized measure space, the operator-valued maps
//! `A(z)`, `B(z)` and `R(z)` along a Jordan contour, integrates them into the
//! compact perturbation of an idempotent `P + L`, and extracts the candidate
//! invariant subspace. Every identity the construction relies on can be
//! checked numerically against an independent eigendecomposition oracle.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`numkernel`] | dense complex SVD, eigendecomposition, solves, norms |
//! | [`operator`] | measure space, `M_f`, `K = Σ sₙ uₙ⊗vₙ`, `T` |
//! | [`contour`] | circles, the split rectangle, winding numbers, quadrature |
//! | [`resolvent`] | `A(z)`, `A₁(z)`, `A₂(z)`, `B(z)`, `R(z)` and the norm bounds |
//! | [`projection`] | `P`, `L`, `P + L`, the Riesz oracle, subspace extraction |
//! | [`hypotheses`] | executable checks of the existence hypotheses |
//! | [`scenarios`] | commutant sampling, verification, example generators, sweeps |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod error;
pub mod hypotheses;
pub mod numkernel;
pub mod operator;
pub mod projection;
pub mod resolvent;
pub mod scenarios;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numkernel::ComplexMatrix;
