//! Finite element library for eigenvalue problems of the two-dimensional
//! magnetic Schrödinger operator `(-i∇ - A)·(-i∇ - A) + V` on polygonal
//! domains, with Dirichlet, Neumann, or mixed boundary conditions.
//!
//! The distinguishing feature is the canonical gauge transformation: any
//! vector potential `A` can be replaced by the minimal-L²-norm equivalent
//! field `F = A - ∇a`, where `a` solves a scalar Neumann problem. The
//! operators `H(A,V)` and `H(F,V)` are unitarily equivalent, so they share
//! eigenvalues and eigenfunction moduli, but the discrete problem for `F`
//! is far better conditioned with respect to the mesh size. [`gauge`]
//! computes the transformation, [`eig`] solves the generalized eigenproblem,
//! and [`diagnostics`] quantifies the gauge comparison.
//!
//! Pipeline: build a [`mesh::Mesh`], a [`fe::FeSpace`], pick a vector
//! potential from [`potentials`], optionally pass it through
//! [`gauge::compute_canonical_gauge`], assemble the Hermitian pencil with
//! [`assemble::assemble_magnetic_forms`], and call
//! [`eig::lowest_eigenpairs`].

pub mod assemble;
pub mod diagnostics;
pub mod eig;
mod error;
pub mod fe;
pub mod gauge;
pub mod mesh;
pub mod potentials;
mod smalleig;
pub mod sparse;

pub use assemble::HermitianPencil;
pub use eig::EigenResult;
pub use error::Error;
pub use fe::{FeSpace, QuadRule};
pub use gauge::GaugeField;
pub use mesh::{DomainSpec, Mesh};
pub use potentials::{ScalarPotential, VectorPotential};
pub use sparse::SparseMatrix;

/// Library version, recorded in run manifests so output directories can be
/// traced back to the potential catalog that produced them.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
