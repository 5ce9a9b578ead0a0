//! Quantitative evaluation: antisymmetry about an axis, eigenvalue gaps,
//! direct difference quotients and cross-orthogonality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{evaluate, mass_full, FEFunction, SparseSym};
use crate::geometry::Point2;

/// Mirror axis for the antisymmetry measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReflectionAxis {
    VerticalLine(f64),
    HorizontalLine(f64),
}

impl ReflectionAxis {
    pub fn reflect(&self, p: Point2) -> Point2 {
        match *self {
            ReflectionAxis::VerticalLine(x0) => Point2::new(2.0 * x0 - p.x, p.y),
            ReflectionAxis::HorizontalLine(y0) => Point2::new(p.x, 2.0 * y0 - p.y),
        }
    }
}

/// Antisymmetry measure `||u + u*|| / ||u||`, where `u*` is the nodal
/// interpolant of the reflection of `u` about the axis. 0 means perfectly
/// antisymmetric, 2 perfectly symmetric. Reflected nodes that leave the
/// domain by no more than `tol` are clamped to the nearest element.
pub fn antisymmetry(u: &FEFunction, axis: &ReflectionAxis, tol: f64) -> Result<f64> {
    let mesh = u.mesh();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in mesh.nodes() {
        let c = match axis {
            ReflectionAxis::VerticalLine(_) => p.x,
            ReflectionAxis::HorizontalLine(_) => p.y,
        };
        lo = lo.min(c);
        hi = hi.max(c);
    }
    let coord = match axis {
        ReflectionAxis::VerticalLine(x0) => *x0,
        ReflectionAxis::HorizontalLine(y0) => *y0,
    };
    if coord < lo - tol || coord > hi + tol {
        return Err(Error::DimensionMismatch(format!(
            "reflection axis at {coord} misses the domain bounding box [{lo}, {hi}]"
        )));
    }

    let mass = mass_full(mesh)?;
    let norm_u = mass.quad(u.values(), u.values()).max(0.0).sqrt();
    if norm_u == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let mut combined = Vec::with_capacity(mesh.num_nodes());
    for (i, &p) in mesh.nodes().iter().enumerate() {
        let reflected = evaluate(u, axis.reflect(p), tol)?;
        combined.push(u.values()[i] + reflected);
    }
    Ok(mass.quad(&combined, &combined).max(0.0).sqrt() / norm_u)
}

/// Difference quotient `(lambda_t - lambda_0) / t`.
pub fn difference_quotient(lambda_t: f64, lambda_0: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    Ok((lambda_t - lambda_0) / t)
}

/// `values[j] - values[i]`.
pub fn gap(values: &[f64], i: usize, j: usize) -> Result<f64> {
    let len = values.len();
    let bound = |index: usize| -> Result<f64> {
        values
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange { index, len })
    };
    Ok(bound(j)? - bound(i)?)
}

/// Normalized cross inner product `|(u, v)_B| / (||u||_B ||v||_B)` with a
/// full (all-node) mass matrix.
pub fn cross_orthogonality(u: &FEFunction, v: &FEFunction, b: &SparseSym) -> Result<f64> {
    if !u.same_mesh(v) {
        return Err(Error::MeshMismatch);
    }
    if b.dim() != u.mesh().num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {} vs {} nodes",
            b.dim(),
            u.mesh().num_nodes()
        )));
    }
    let nu = b.quad(u.values(), u.values()).max(0.0).sqrt();
    let nv = b.quad(v.values(), v.values()).max(0.0).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(b.quad(u.values(), v.values()).abs() / (nu * nv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{smallest_pairs, SolverOpts};
    use crate::fem::assemble;
    use crate::mesh::{rect_mesh, MeshPattern};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn antisymmetric_mode_scores_zero() {
        let mesh = rect_mesh(16, 1.0, 1.0, MeshPattern::Crossed).unwrap();
        let u = FEFunction::interpolate(&mesh, |p| (2.0 * PI * p.x).sin() * (PI * p.y).sin(), true);
        let a = antisymmetry(&u, &ReflectionAxis::VerticalLine(0.5), 1e-10 * mesh.diameter())
            .unwrap();
        assert!(a <= 1e-10, "A = {a:e}");
    }

    #[test]
    fn symmetric_mode_scores_two() {
        let mesh = rect_mesh(8, 1.0, 1.0, MeshPattern::Crossed).unwrap();
        let u = FEFunction::interpolate(&mesh, |p| (PI * p.x).sin() * (PI * p.y).sin(), true);
        let a = antisymmetry(&u, &ReflectionAxis::VerticalLine(0.5), 1e-10 * mesh.diameter())
            .unwrap();
        assert_relative_eq!(a, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn antisymmetry_is_sign_and_scale_invariant() {
        let mesh = rect_mesh(6, 1.0, 1.0, MeshPattern::Crossed).unwrap();
        let tol = 1e-10 * mesh.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let axis = ReflectionAxis::HorizontalLine(0.5);
        for _ in 0..10 {
            let u = FEFunction::from_nodal(
                &mesh,
                (0..mesh.num_nodes())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let a = antisymmetry(&u, &axis, tol).unwrap();
            assert!((0.0..=2.0 + 1e-12).contains(&a));

            let neg = FEFunction::from_nodal(&mesh, u.values().iter().map(|v| -v).collect()).unwrap();
            assert_relative_eq!(antisymmetry(&neg, &axis, tol).unwrap(), a, max_relative = 1e-12);

            let c = rng.random_range(0.1..5.0);
            let scaled =
                FEFunction::from_nodal(&mesh, u.values().iter().map(|v| c * v).collect()).unwrap();
            assert_relative_eq!(
                antisymmetry(&scaled, &axis, tol).unwrap(),
                a,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn antisymmetry_rejects_zero_and_far_axis() {
        let mesh = rect_mesh(4, 1.0, 1.0, MeshPattern::Left).unwrap();
        let zero = FEFunction::from_nodal(&mesh, vec![0.0; mesh.num_nodes()]).unwrap();
        assert!(matches!(
            antisymmetry(&zero, &ReflectionAxis::VerticalLine(0.5), 1e-10),
            Err(Error::ZeroFunction)
        ));
        let u = FEFunction::interpolate(&mesh, |p| p.x, true);
        assert!(antisymmetry(&u, &ReflectionAxis::VerticalLine(7.0), 1e-10).is_err());
    }

    #[test]
    fn quotient_values() {
        assert_eq!(difference_quotient(5.0, 3.0, 1.0).unwrap(), 2.0);
        assert_eq!(difference_quotient(3.0, 3.0, 0.5).unwrap(), 0.0);
        assert!(matches!(
            difference_quotient(5.0, 3.0, 0.0),
            Err(Error::ZeroPerturbation)
        ));
        // Separable rectangle spectrum: lambda_2(eps) = pi^2 (4/(1+eps)^2 + 1).
        let eps = 0.1;
        let l2_t = PI * PI * (4.0 / (1.1 * 1.1) + 1.0);
        let l2_0 = 5.0 * PI * PI;
        let q = difference_quotient(l2_t, l2_0, eps).unwrap();
        assert_relative_eq!(q, -68.52, max_relative = 1e-3);
    }

    #[test]
    fn gap_values() {
        // Analytic separable gap at eps = 0.1.
        let eps = 0.1_f64;
        let l2 = PI * PI * (4.0 / (1.0 + eps).powi(2) + 1.0);
        let l3 = PI * PI * (1.0 / (1.0 + eps).powi(2) + 4.0);
        let g = gap(&[l2, l3], 0, 1).unwrap();
        assert_relative_eq!(g, 3.0 * PI * PI * (1.0 - (1.0 + eps).powi(-2)), max_relative = 1e-13);
        assert_relative_eq!(g, 5.139, max_relative = 1e-3);

        assert_eq!(gap(&[4.0, 4.0], 0, 1).unwrap(), 0.0);
        assert!(matches!(
            gap(&[1.0], 0, 3),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn cross_orthogonality_of_solver_outputs() {
        let mesh = rect_mesh(8, 1.0, 1.0, MeshPattern::Left).unwrap();
        let (a, b, dofs) = assemble(&mesh).unwrap();
        let pairs = smallest_pairs(&a, &b, 3, &SolverOpts::default()).unwrap();
        let full = mass_full(&mesh).unwrap();
        let fns: Vec<FEFunction> = pairs
            .iter()
            .map(|p| FEFunction::from_interior(&mesh, &dofs, &p.vector).unwrap())
            .collect();
        assert_relative_eq!(
            cross_orthogonality(&fns[0], &fns[0], &full).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        for i in 0..fns.len() {
            for j in (i + 1)..fns.len() {
                assert!(cross_orthogonality(&fns[i], &fns[j], &full).unwrap() <= 1e-10);
            }
        }
    }
}
