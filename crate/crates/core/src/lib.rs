//! Numerical core for the two-dimensional hard-core Bose-Hubbard (HCB) model.
//!
//! Everything here is `no_std` with `alloc`: lattice geometry, fixed
//! excitation-number bases, sparse Hamiltonians, Lanczos eigen- and
//! Krylov propagation kernels, many-body observables, the resonator drive,
//! and the closed-form circuit and readout formulas. Dense eigensolvers are
//! pluggable through [`spectra::SymmetricBackend`]; the `hcb` crate supplies a
//! LAPACK-backed implementation.
//!
//! Energies are measured in units of the hopping `J` unless a function says
//! otherwise. Bit `b` of a basis mask is the occupation of site `b`, and sites
//! are indexed row-major.

#![no_std]

extern crate alloc;

pub mod basis;
pub mod circuit;
pub mod drive;
mod error;
pub mod hamiltonian;
pub mod krylov;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod planner;
pub mod sparse;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
