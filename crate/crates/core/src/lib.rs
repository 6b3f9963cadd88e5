//! Numerical toolkit for an n-level atom coupled to one radiation mode in the
//! strong-coupling regime.
//!
//! The crate is layered bottom-up:
//!
//! * [`special`]: Laguerre polynomials, Pochhammer symbols and the finite
//!   sums behind the coherent-operator matrix elements.
//! * [`fock`]: ladder operators for the oscillator, su(1,1) and su(2) modes,
//!   the dense [`CMatrix`] type and a Padé matrix exponential.
//! * [`coherent`]: closed-form matrix elements of the displacement-type
//!   operators, cross-checked against the numerical exponential.
//! * [`model`]: clock/shift matrices, the Hamiltonian, its dressed spectrum
//!   and multi-cat states.
//! * [`rwa`]: Rabi frequencies, resonance conditions and time integration.
//! * [`gates`]: the resulting elementary qudit unitaries and a small search.
//! * [`cli`]: configuration and the `qudit-rabi` command-line front end.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coherent;
pub mod error;
pub mod fock;
pub mod gates;
pub mod model;
pub mod rwa;
pub mod special;

pub use error::{Error, Result};
pub use fock::{AlgebraSpec, CMatrix, LadderTriple, StateVector};
pub use num_complex::Complex64;
