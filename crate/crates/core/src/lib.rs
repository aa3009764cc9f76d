//! Whitney-form exterior calculus on simplicial manifolds with boundary,
//! the Witten-deformed complex `d_X = d + ι_X`, harmonic fields, the
//! Dirichlet-to-Neumann map and the recovery of (equivariant) cohomology
//! from boundary data.
//!
//! The pipeline is layered bottom-up:
//!
//! * [`mesh`] — simplicial complexes, generators, OFF I/O, exact Betti oracle
//! * [`dec`] — Whitney mass matrices, wedge pairings, Galerkin Hodge star
//! * [`witten`] — graded complexes (degree or parity) for `X = 0` and `B × S¹`
//! * [`bvp`] — harmonic-field spaces, decompositions, boundary value problems
//! * [`dn`] — the DN map, recovery operators, Hilbert transform
//! * [`topology`] — exact sequence, cup product, equivariant report

pub mod bvp;
pub mod dec;
pub mod dn;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod mesh;
pub mod tolerances;
pub mod topology;
pub mod witten;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
