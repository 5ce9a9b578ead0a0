//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by geometry, meshing, assembly, eigensolvers and the
/// stabilization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polygon is self-intersecting{0}")]
    SelfIntersecting(String),

    #[error("polygon has non-positive signed area (vertices must be counter-clockwise)")]
    NotCounterClockwise,

    #[error("polygon is not convex: fan triangulation would overlap or leave gaps")]
    NonConvex,

    #[error("degenerate triangle (area {area:e} below tolerance)")]
    DegenerateTriangle { area: f64 },

    #[error("mesh node {node} lies outside every macro triangle")]
    NodeOutsideMacro { node: usize },

    #[error("transported element {element} has non-positive area")]
    InvertedElement { element: usize },

    #[error("element {element} straddles macro triangles with different maps; the global map is not affine on it")]
    NonAffineElement { element: usize },

    #[error("point ({x}, {y}) lies outside the meshed domain (tolerance {tol:e})")]
    OutsideDomain { x: f64, y: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("functions live on different meshes")]
    MeshMismatch,

    #[error("eigensolver did not converge within {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("right-hand matrix N of the pencil is singular within pivot tolerance")]
    SingularN,

    #[error("perturbed basis is rank deficient (Gram condition number {cond:e})")]
    RankDeficientBasis { cond: f64 },

    #[error("generalized eigenvalues have non-negligible imaginary parts (max |Im| {max_imag:e})")]
    ComplexQuotients { max_imag: f64 },

    #[error("perturbation magnitude t = 0: difference quotients are undefined")]
    ZeroPerturbation,

    #[error("function has zero norm")]
    ZeroFunction,

    #[error("index {index} out of range for list of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
