//! Quasifree completely positive semigroups on `n` bosonic modes.
//!
//! The crate works in the `(ℓ, m, S)` phase-space picture of Gaussian states
//! and the `(K, C)` picture of quasifree semigroups, synthesises the
//! Lindblad/Hamiltonian data of a unitary dilation, and carries an
//! independent truncated-Fock-space oracle that every closed form is checked
//! against. A small symbolic engine covers the quantum Ito table of the
//! fundamental processes and the Hudson–Parthasarathy unitarity conditions.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fields;
pub mod fock;
pub mod gaussian;
pub mod ito;
pub mod linalg;
pub mod quasifree;
pub mod synthesis;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, Validity};
pub use linalg::{ComplexMatrix, ComplexVector, RealMatrix, RealVector};
pub use quasifree::{GeneratorCoefficients, QuasifreePair, WeylAction};
pub use synthesis::{DilationSpec, HamiltonianTerm, LindbladTerm};

pub use num_complex::Complex64;

/// Library version embedded in CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
