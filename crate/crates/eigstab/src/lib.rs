//! Stable computation of Dirichlet-Laplacian eigenfunctions for tightly
//! clustered eigenvalues caused by polygon vertex perturbations.
//!
//! When a symmetric polygon is perturbed, multiple eigenvalues split into
//! clusters whose gap can be far below discretization and rounding errors.
//! Standard FEM then returns an essentially arbitrary basis of the
//! near-degenerate invariant subspace. This crate recovers well-defined
//! eigenfunctions by solving a small generalized eigenproblem built from
//! first-order shape difference quotients of the eigenvalues: the quotients
//! stay well separated as the perturbation size goes to zero, so the small
//! problem is well conditioned even when the eigenvalue gap is not.
//!
//! Pipeline: mesh the unperturbed polygon, transport the mesh affinely onto
//! the perturbed polygon (identical connectivity), solve both eigenproblems,
//! assemble the perturbation bilinear forms on the unperturbed mesh, solve the
//! small dense pencil, and recombine the perturbed-domain eigenvectors with
//! its eigenvector coefficients.

pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod metrics;
pub mod stabilize;

pub use error::{Error, Result};
pub use geometry::{Point2, PolygonSpec};
pub use mesh::{MeshPattern, TriMesh};
