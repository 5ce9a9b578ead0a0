//! Eigensolvers: sparse symmetric-definite pencils and small dense pencils.
//!
//! The sparse solver targets the smallest eigenpairs of `A x = lambda B x`
//! with A, B symmetric positive definite. It factorizes A once (envelope
//! Cholesky; the structured meshes keep the profile narrow) and runs blocked
//! inverse iteration with Rayleigh-Ritz extraction in the B inner product.
//! For tightly clustered eigenvalues the returned vectors span the invariant
//! subspace to the requested residual; the split between them is determined
//! only up to the cluster gap, which is exactly the instability the
//! stabilization pipeline removes.
//!
//! The dense solver handles the small (generally nonsymmetric) pencil
//! `M sigma = mu N sigma` by reduction with N's LU factorization, Schur
//! eigenvalues and null-space extraction with inverse-iteration polish.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::SparseSym;

/// Eigenpair of the reduced sparse pencil; `vector` holds interior DOFs.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// Eigenpair of the small dense pencil. Values and vectors are complex; the
/// caller decides whether imaginary parts are tolerable.
#[derive(Debug, Clone)]
pub struct SmallEigenPair {
    pub value: Complex<f64>,
    pub vector: DVector<Complex<f64>>,
}

/// Options for the sparse solver. Runs are deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct SolverOpts {
    /// Relative residual target `||Ax - lambda Bx|| <= tol ||Ax||`.
    pub tol: f64,
    /// Iteration cap for the blocked inverse iteration.
    pub max_iter: usize,
    /// Seed of the random starting block.
    pub seed: u64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            seed: 7919,
        }
    }
}

/// Dimension below which the dense fallback path is used.
const DENSE_LIMIT: usize = 256;

/// Relative residual `||Ax - lambda Bx||_2 / ||Ax||_2` of a candidate pair.
pub fn residual(a: &SparseSym, b: &SparseSym, pair: &EigenPair) -> f64 {
    let ax = a.matvec(&pair.vector);
    let bx = b.matvec(&pair.vector);
    let num = (&ax - pair.value * &bx).norm();
    let den = ax.norm();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Computes the `m` smallest eigenpairs of `A x = lambda B x`, ascending and
/// B-orthonormal.
pub fn smallest_pairs(
    a: &SparseSym,
    b: &SparseSym,
    m: usize,
    opts: &SolverOpts,
) -> Result<Vec<EigenPair>> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "pencil dimensions differ: {} vs {}",
            dim,
            b.dim()
        )));
    }
    if m == 0 || m > dim {
        return Err(Error::DimensionMismatch(format!(
            "requested {m} eigenpairs from a dimension-{dim} pencil"
        )));
    }
    let block = (m + m.max(4)).min(dim);
    if dim <= DENSE_LIMIT || block == dim {
        dense_smallest(a, b, m)
    } else {
        subspace_smallest(a, b, m, block, opts)
    }
}

/// Dense fallback: reduce with B's Cholesky factor and diagonalize.
fn dense_smallest(a: &SparseSym, b: &SparseSym, m: usize) -> Result<Vec<EigenPair>> {
    let ad = a.to_dense();
    let bd = b.to_dense();
    let chol = bd
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let l = chol.l();
    // C = L^-1 A L^-T, symmetrized against roundoff.
    let la = l
        .solve_lower_triangular(&ad)
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    order
        .iter()
        .take(m)
        .map(|&k| {
            let y = eig.eigenvectors.column(k).into_owned();
            let x = lt
                .solve_upper_triangular(&y)
                .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
            Ok(EigenPair {
                value: eig.eigenvalues[k],
                vector: x,
            })
        })
        .collect()
}

/// Blocked inverse iteration with Rayleigh-Ritz in the B inner product.
fn subspace_smallest(
    a: &SparseSym,
    b: &SparseSym,
    m: usize,
    block: usize,
    opts: &SolverOpts,
) -> Result<Vec<EigenPair>> {
    let dim = a.dim();
    let factor = EnvelopeCholesky::factor(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(dim, block, |_, _| rng.random_range(-1.0..1.0));
    b_orthonormalize(&mut x, b, &mut rng)?;

    let mut best_residual = f64::INFINITY;
    let mut since_improvement = 0usize;
    for iter in 1..=opts.max_iter {
        // Y = A^-1 B X, one envelope solve per column.
        let mut y = DMatrix::zeros(dim, block);
        for k in 0..block {
            let bx = b.matvec(&x.column(k).into_owned());
            y.set_column(k, &factor.solve(&bx));
        }
        b_orthonormalize(&mut y, b, &mut rng)?;

        // Rayleigh-Ritz: project A onto the B-orthonormal basis.
        let mut ay = DMatrix::zeros(dim, block);
        for k in 0..block {
            ay.set_column(k, &a.matvec(&y.column(k).into_owned()));
        }
        let ahat = {
            let p = y.transpose() * &ay;
            (&p + p.transpose()) * 0.5
        };
        let eig = ahat.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let rotation = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        x = &y * &rotation;
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

        let mut max_res = 0.0_f64;
        for (i, &value) in values.iter().take(m).enumerate() {
            let pair = EigenPair {
                value,
                vector: x.column(i).into_owned(),
            };
            max_res = max_res.max(residual(a, b, &pair));
        }
        if max_res <= opts.tol {
            return Ok(values
                .into_iter()
                .take(m)
                .enumerate()
                .map(|(i, value)| EigenPair {
                    value,
                    vector: x.column(i).into_owned(),
                })
                .collect());
        }
        if max_res < 0.99 * best_residual {
            best_residual = max_res.min(best_residual);
            since_improvement = 0;
        } else {
            since_improvement += 1;
            // Stalled at the rounding floor above tol: give up early.
            if since_improvement > 100 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    best_residual,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        best_residual,
    })
}

/// Makes the columns of `x` B-orthonormal via Cholesky of the Gram matrix,
/// re-randomizing the block in the (degenerate) event of rank loss.
fn b_orthonormalize(x: &mut DMatrix<f64>, b: &SparseSym, rng: &mut ChaCha8Rng) -> Result<()> {
    for attempt in 0..20 {
        let mut bx = DMatrix::zeros(x.nrows(), x.ncols());
        for k in 0..x.ncols() {
            bx.set_column(k, &b.matvec(&x.column(k).into_owned()));
        }
        let gram = x.transpose() * &bx;
        let gram = (&gram + gram.transpose()) * 0.5;
        if let Some(chol) = gram.cholesky() {
            // X <- X L^-T, i.e. solve L X_new^T = X^T.
            let xt = chol.l().solve_lower_triangular(&x.transpose());
            if let Some(xt) = xt {
                *x = xt.transpose();
                return Ok(());
            }
        }
        if attempt == 19 {
            break;
        }
        // Rank-deficient start block: replace it and retry.
        *x = DMatrix::from_fn(x.nrows(), x.ncols(), |_, _| rng.random_range(-1.0..1.0));
    }
    Err(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })
}

/// Envelope (profile) Cholesky factorization `A = L L^T`. Cholesky fill stays
/// inside the row envelope, so for the row-ordered structured meshes this is
/// a compact exact factorization.
struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    fn factor(a: &SparseSym) -> Result<Self> {
        let dim = a.dim();
        let mut first = vec![0usize; dim];
        for (i, cols, _) in a.rows() {
            first[i] = cols.first().copied().unwrap_or(i).min(i);
        }
        let mut offset = Vec::with_capacity(dim + 1);
        offset.push(0usize);
        for i in 0..dim {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offset[dim]];
        for (i, cols, vals) in a.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[offset[i] + (j - first[i])] = v;
                }
            }
        }
        for i in 0..dim {
            let fi = first[i];
            let base_i = offset[i];
            for j in fi..=i {
                let fj = first[j];
                let base_j = offset[j];
                let start = fi.max(fj);
                let mut s = data[base_i + j - fi];
                for k in start..j {
                    s -= data[base_i + k - fi] * data[base_j + k - fj];
                }
                if j < i {
                    data[base_i + j - fi] = s / data[base_j + j - fj];
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    data[base_i + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            first,
            offset,
            data,
        })
    }

    /// Solves `A x = rhs` by forward and back substitution.
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let dim = self.first.len();
        let mut y = rhs.clone();
        for i in 0..dim {
            let f = self.first[i];
            let base = self.offset[i];
            let mut s = y[i];
            for k in f..i {
                s -= self.data[base + k - f] * y[k];
            }
            y[i] = s / self.data[base + i - f];
        }
        for i in (0..dim).rev() {
            let f = self.first[i];
            let base = self.offset[i];
            let xi = y[i] / self.data[base + i - f];
            y[i] = xi;
            for k in f..i {
                y[k] -= self.data[base + k - f] * xi;
            }
        }
        y
    }
}

/// Solves the dense generalized eigenproblem `M sigma = mu N sigma` for all
/// eigenpairs, sorted by ascending real part (then imaginary part). N must be
/// invertible within a pivot tolerance of `1e-12 * max|N|`.
pub fn dense_gep(m_mat: &DMatrix<f64>, n_mat: &DMatrix<f64>) -> Result<Vec<SmallEigenPair>> {
    let dim = m_mat.nrows();
    if m_mat.ncols() != dim || n_mat.nrows() != dim || n_mat.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "pencil must be square and matched: M is {}x{}, N is {}x{}",
            m_mat.nrows(),
            m_mat.ncols(),
            n_mat.nrows(),
            n_mat.ncols()
        )));
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    let n_scale = n_mat.amax();
    let lu = n_mat.clone().lu();
    let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
    if min_pivot <= 1e-12 * n_scale {
        return Err(Error::SingularN);
    }
    let c = lu.solve(m_mat).ok_or(Error::SingularN)?;

    let schur = nalgebra::linalg::Schur::try_new(c.clone(), f64::EPSILON, 100_000).ok_or(
        Error::NoConvergence {
            iterations: 100_000,
            best_residual: f64::NAN,
        },
    )?;
    let mut values: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let scale = c.amax().max(1.0);
    let mut pairs = Vec::with_capacity(dim);
    let mut k = 0;
    while k < dim {
        // Group (numerically) coincident eigenvalues and pull an orthonormal
        // basis of the joint near-null space. Real eigenvalues of the real
        // matrix stay in real arithmetic so the vectors come out real.
        let mut g = 1;
        while k + g < dim && (values[k + g] - values[k]).norm() <= 1e-10 * scale {
            g += 1;
        }
        let mean = values[k..k + g].iter().sum::<Complex<f64>>() / g as f64;
        if mean.im.abs() <= 1e-14 * scale {
            let shifted = &c - DMatrix::from_diagonal_element(dim, dim, mean.re);
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.as_ref().expect("SVD computed with right vectors");
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
            for (slot, &row) in order.iter().take(g).enumerate() {
                let mut real_vec: DVector<f64> = v_t.row(row).transpose();
                polish_real_eigenvector(&c, values[k + slot].re, &mut real_vec);
                pairs.push(SmallEigenPair {
                    value: values[k + slot],
                    vector: real_vec.map(|v| Complex::new(v, 0.0)),
                });
            }
        } else {
            let c_complex = c.map(|v| Complex::new(v, 0.0));
            let shifted = &c_complex - DMatrix::from_diagonal_element(dim, dim, mean);
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.as_ref().expect("SVD computed with right vectors");
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
            for (slot, &row) in order.iter().take(g).enumerate() {
                let mut vector: DVector<Complex<f64>> = v_t.row(row).adjoint();
                polish_eigenvector(&c_complex, values[k + slot], &mut vector);
                pairs.push(SmallEigenPair {
                    value: values[k + slot],
                    vector,
                });
            }
        }
        k += g;
    }
    pairs.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    Ok(pairs)
}

/// One step of inverse iteration to sharpen a real null-space candidate;
/// keeps the input vector whenever the shifted matrix is exactly singular.
fn polish_real_eigenvector(c: &DMatrix<f64>, value: f64, vector: &mut DVector<f64>) {
    let dim = c.nrows();
    let shifted = c - DMatrix::from_diagonal_element(dim, dim, value);
    let lu = shifted.lu();
    let rhs = vector.clone();
    if let Some(w) = lu.solve(&rhs) {
        let norm = w.norm();
        if norm.is_finite() && norm > 0.0 {
            *vector = w / norm;
        }
    }
}

/// One step of inverse iteration to sharpen a null-space candidate; keeps the
/// input vector whenever the shifted matrix is exactly singular.
fn polish_eigenvector(
    c: &DMatrix<Complex<f64>>,
    value: Complex<f64>,
    vector: &mut DVector<Complex<f64>>,
) {
    let dim = c.nrows();
    let shifted = c - DMatrix::from_diagonal_element(dim, dim, value);
    let lu = shifted.lu();
    let rhs = vector.clone();
    if let Some(w) = lu.solve(&rhs) {
        let norm = w.norm();
        if norm.is_finite() && norm > 0.0 {
            *vector = w / Complex::new(norm, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{rect_mesh, MeshPattern};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn pencil_residual(
        m_mat: &DMatrix<f64>,
        n_mat: &DMatrix<f64>,
        pair: &SmallEigenPair,
    ) -> f64 {
        let mc = m_mat.map(|v| Complex::new(v, 0.0));
        let nc = n_mat.map(|v| Complex::new(v, 0.0));
        (&mc * &pair.vector - (&nc * &pair.vector) * pair.value).norm()
            / ((m_mat.amax() + pair.value.norm() * n_mat.amax()) * pair.vector.norm())
    }

    #[test]
    fn envelope_cholesky_matches_dense_solve() {
        let mesh = rect_mesh(9, 1.3, 0.7, MeshPattern::Crossed).unwrap();
        let (a, _, _) = assemble(&mesh).unwrap();
        let factor = EnvelopeCholesky::factor(&a).unwrap();
        let dense = a.to_dense();
        let chol = dense.cholesky().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let rhs = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let x = factor.solve(&rhs);
            let x_ref = chol.solve(&rhs);
            assert!((&x - &x_ref).norm() <= 1e-10 * x_ref.norm());
            assert!((a.matvec(&x) - &rhs).norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn envelope_cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let s = SparseSym::from_dense(&m).unwrap();
        assert!(matches!(
            EnvelopeCholesky::factor(&s),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn single_dof_crossed_square() {
        let mesh = rect_mesh(1, 1.0, 1.0, MeshPattern::Crossed).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        let pairs = smallest_pairs(&a, &b, 1, &SolverOpts::default()).unwrap();
        assert_relative_eq!(pairs[0].value, 24.0, max_relative = 1e-12);
        assert!(residual(&a, &b, &pairs[0]) <= 1e-12);
    }

    #[test]
    fn square_spectrum_and_multiplicity() {
        // Forces the iterative path (n = 32 has 961 interior DOFs).
        let mesh = rect_mesh(32, 1.0, 1.0, MeshPattern::Left).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        let opts = SolverOpts::default();
        let pairs = smallest_pairs(&a, &b, 4, &opts).unwrap();

        let exact1 = 2.0 * PI * PI;
        assert!(pairs[0].value >= exact1 && pairs[0].value <= exact1 * 1.01);

        for w in pairs.windows(2) {
            assert!(w[0].value <= w[1].value);
        }
        assert!(pairs[0].value > 0.0);

        // B-orthonormality of the returned batch.
        for (i, p) in pairs.iter().enumerate() {
            for (j, q) in pairs.iter().enumerate() {
                let g = b.quad(p.vector.as_slice(), q.vector.as_slice());
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - expected).abs() <= 1e-10, "Gram ({i},{j}) = {g}");
            }
        }
        for p in &pairs {
            assert!(residual(&a, &b, p) <= 1e-10);
        }
    }

    #[test]
    fn crossed_pattern_has_exact_discrete_multiplicity() {
        // The crossed mesh keeps the full square symmetry group, so the
        // second discrete eigenvalue is exactly double.
        let mesh = rect_mesh(16, 1.0, 1.0, MeshPattern::Crossed).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        let pairs = smallest_pairs(&a, &b, 3, &SolverOpts::default()).unwrap();
        let split = (pairs[2].value - pairs[1].value).abs() / pairs[1].value;
        assert!(split <= 1e-10, "relative split {split:e}");
    }

    #[test]
    fn left_pattern_splits_the_degenerate_pair() {
        // A single diagonal direction reduces the mesh symmetry to an abelian
        // group, so the discrete pair splits at O(h^2). This is why the
        // exact-identity checks use the crossed pattern.
        let mesh = rect_mesh(16, 1.0, 1.0, MeshPattern::Left).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        let pairs = smallest_pairs(&a, &b, 3, &SolverOpts::default()).unwrap();
        let split = (pairs[2].value - pairs[1].value).abs() / pairs[1].value;
        assert!(
            (1e-5..1e-1).contains(&split),
            "expected O(h^2) split, got {split:e}"
        );
    }

    #[test]
    fn dilation_covariance() {
        // Transporting the mesh through a uniform dilation by (1+t) divides
        // every discrete eigenvalue by (1+t)^2 exactly.
        use crate::geometry::{
            fan_macro_triangulation, macro_maps, perturb_polygon, unit_square, PerturbationSpec,
        };
        use crate::mesh::transport;
        let t = 0.1;
        let square = unit_square();
        let fan = fan_macro_triangulation(&square).unwrap();
        let spec = PerturbationSpec::new(vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0], t).unwrap();
        let p_t = perturb_polygon(&square, &spec).unwrap();
        let maps = macro_maps(&fan, &p_t).unwrap();
        let mesh0 = rect_mesh(8, 1.0, 1.0, MeshPattern::Left).unwrap();
        let pair = transport(mesh0, &fan, &maps, t).unwrap();

        let (a0, b0, _) = assemble(&pair.mesh0).unwrap();
        let (a1, b1, _) = assemble(&pair.mesh_t).unwrap();
        let opts = SolverOpts::default();
        let p0 = smallest_pairs(&a0, &b0, 3, &opts).unwrap();
        let p1 = smallest_pairs(&a1, &b1, 3, &opts).unwrap();
        for (u, v) in p0.iter().zip(&p1) {
            assert_relative_eq!(
                v.value,
                u.value / (1.0 + t) / (1.0 + t),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn residual_scales_linearly_in_perturbation() {
        let mesh = rect_mesh(6, 1.0, 1.0, MeshPattern::Left).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        let pairs = smallest_pairs(&a, &b, 1, &SolverOpts::default()).unwrap();
        let exact = &pairs[0];
        assert!(residual(&a, &b, exact) <= 1e-12);

        let dir = DVector::from_fn(exact.vector.len(), |i, _| if i % 2 == 0 { 1.0 } else { -0.5 });
        let r: Vec<f64> = [1e-8, 2e-8]
            .iter()
            .map(|&d| {
                let p = EigenPair {
                    value: exact.value,
                    vector: &exact.vector + d * &dir,
                };
                residual(&a, &b, &p)
            })
            .collect();
        let ratio = r[1] / r[0];
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_requests() {
        let mesh = rect_mesh(2, 1.0, 1.0, MeshPattern::Left).unwrap();
        let (a, b, _) = assemble(&mesh).unwrap();
        assert!(smallest_pairs(&a, &b, 0, &SolverOpts::default()).is_err());
        assert!(smallest_pairs(&a, &b, a.dim() + 1, &SolverOpts::default()).is_err());
    }

    #[test]
    fn dense_gep_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let n = DMatrix::identity(2, 2);
        let pairs = dense_gep(&m, &n).unwrap();
        assert_relative_eq!(pairs[0].value.re, 2.0, max_relative = 1e-12);
        assert_relative_eq!(pairs[1].value.re, 3.0, max_relative = 1e-12);
        assert!(pairs[0].value.im.abs() <= 1e-14);
        // Eigenvectors are the standard basis up to phase.
        assert!(pairs[0].vector[0].norm() >= 1.0 - 1e-10);
        assert!(pairs[0].vector[1].norm() <= 1e-10);
        assert!(pairs[1].vector[1].norm() >= 1.0 - 1e-10);
    }

    #[test]
    fn dense_gep_rejects_singular_n() {
        let m = DMatrix::identity(2, 2);
        let n = DMatrix::zeros(2, 2);
        assert!(matches!(dense_gep(&m, &n), Err(Error::SingularN)));
    }

    #[test]
    fn dense_gep_matches_quadratic_formula() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0_f64));
            let n = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0_f64));
            if n.determinant().abs() < 0.1 {
                continue;
            }
            let pairs = dense_gep(&m, &n).unwrap();
            // Roots of det(M - mu N) = det(N) mu^2 - tr(adj(N) M) mu + det(M).
            let a = n.determinant();
            let adj_n = DMatrix::from_row_slice(2, 2, &[n[(1, 1)], -n[(0, 1)], -n[(1, 0)], n[(0, 0)]]);
            let bq = -(adj_n * &m).trace();
            let cq = m.determinant();
            let disc = Complex::new(bq * bq - 4.0 * a * cq, 0.0).sqrt();
            let mut roots = [
                (Complex::new(-bq, 0.0) + disc) / (2.0 * a),
                (Complex::new(-bq, 0.0) - disc) / (2.0 * a),
            ];
            roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
            for (pair, root) in pairs.iter().zip(roots.iter()) {
                assert!(
                    (pair.value - root).norm() <= 1e-10 * (1.0 + root.norm()),
                    "value {} vs root {}",
                    pair.value,
                    root
                );
                assert!(pencil_residual(&m, &n, pair) <= 1e-10);
            }
        }
    }

    #[test]
    fn dense_gep_symmetric_pencil_is_real() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let raw = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let m = (&raw + raw.transpose()) * 0.5;
            let rawn = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let n = &rawn * rawn.transpose() + DMatrix::identity(3, 3);
            let pairs = dense_gep(&m, &n).unwrap();
            for p in &pairs {
                assert!(p.value.im.abs() <= 1e-12 * (1.0 + p.value.re.abs()));
            }
        }
    }

    #[test]
    fn dense_gep_repeated_eigenvalue_gets_independent_vectors() {
        let m = DMatrix::from_diagonal_element(2, 2, 5.0);
        let n = DMatrix::identity(2, 2);
        let pairs = dense_gep(&m, &n).unwrap();
        let det = pairs[0].vector[0] * pairs[1].vector[1]
            - pairs[0].vector[1] * pairs[1].vector[0];
        assert!(det.norm() > 0.5, "vectors nearly dependent: {det}");
    }
}
