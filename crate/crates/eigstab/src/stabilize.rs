//! Shape-difference-quotient stabilization of clustered eigenfunctions.
//!
//! For a matched mesh pair, every element j carries an affine map with linear
//! part `S_j`. Two first-order coefficients per element,
//!
//! ```text
//! P_j = (S_j^-1 S_j^-T - I) / t,      d_j = (|det S_j| - 1) / t,
//! ```
//!
//! define bilinear forms on the unperturbed mesh whose small generalized
//! eigenproblem has the eigenvalue difference quotients `(lambda_i^t -
//! lambda_i^0) / t` as eigenvalues and the stabilizing combination
//! coefficients as eigenvectors. The quotients stay separated as `t -> 0`
//! even though the eigenvalues themselves cluster, so recombining the
//! perturbed-domain eigenvectors with these coefficients recovers
//! well-defined eigenfunctions.
//!
//! Two weights are implemented for the right-hand form: `PaperD` uses the
//! `d_j` weight, `Det` the `|det S_j|` weight. They agree to first order in
//! `t`; `Det` makes the quotients match the discrete eigenvalue differences
//! exactly when the unperturbed discrete cluster is exactly multiple, while
//! `d_j` vanishes identically for area-preserving perturbations (where the
//! `PaperD` pencil is singular).

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::eigensolve::{dense_gep, residual, smallest_pairs, EigenPair, SolverOpts};
use crate::error::{Error, Result};
use crate::fem::{assemble, mass_full, shape_gradients, FEFunction};
use crate::mesh::MatchedMeshPair;

/// Weight of the right-hand bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `sum_j d_j (u, v)`; reproduces the reference quotient tables.
    #[serde(rename = "paper")]
    PaperD,
    /// `sum_j |det S_j| (u, v)`; matches discrete eigenvalue differences
    /// exactly and stays nonsingular for area-preserving perturbations.
    Det,
}

/// Per-element first-order perturbation data.
#[derive(Debug, Clone)]
pub struct ElementCoeff {
    /// Symmetric matrix `(S^-1 S^-T - I) / t`.
    pub p: Matrix2<f64>,
    /// Scalar `(|det S| - 1) / t`.
    pub d: f64,
    /// `|det S|`.
    pub det: f64,
    /// `S^-T`, the gradient transformation of the pull-back.
    pub inv_t: Matrix2<f64>,
}

/// Coefficients for every element of a matched pair.
#[derive(Debug, Clone)]
pub struct ElementCoeffs {
    coeffs: Vec<ElementCoeff>,
    t: f64,
}

impl ElementCoeffs {
    pub fn coeffs(&self) -> &[ElementCoeff] {
        &self.coeffs
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Computes `P_j`, `d_j`, `|det S_j|` and `S_j^-T` for every element.
pub fn element_coeffs(pair: &MatchedMeshPair) -> Result<ElementCoeffs> {
    let t = pair.t();
    if t <= 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    let coeffs = pair
        .element_maps()
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let det = map.det().abs();
            if map.det() <= 0.0 {
                return Err(Error::InvertedElement { element: j });
            }
            let s_inv = *map.inverse_linear();
            let p_raw = (s_inv * s_inv.transpose() - Matrix2::identity()) / t;
            // Symmetric by construction; average away the last rounding bit.
            let p = (p_raw + p_raw.transpose()) * 0.5;
            Ok(ElementCoeff {
                p,
                d: (det - 1.0) / t,
                det,
                inv_t: s_inv.transpose(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ElementCoeffs { coeffs, t })
}

/// Pulls a P1 field on the perturbed mesh back onto the unperturbed mesh.
/// Node-matched affine transport keeps nodal values unchanged, so this is an
/// exact copy onto the other connectivity.
pub fn pull_back<'p>(f: &FEFunction<'_>, pair: &'p MatchedMeshPair) -> Result<FEFunction<'p>> {
    if !std::ptr::eq(f.mesh(), &pair.mesh_t) {
        return Err(Error::MeshMismatch);
    }
    FEFunction::from_nodal(&pair.mesh0, f.values().to_vec())
}

/// Push-forward, the inverse of [`pull_back`].
pub fn push_forward<'p>(f: &FEFunction<'_>, pair: &'p MatchedMeshPair) -> Result<FEFunction<'p>> {
    if !std::ptr::eq(f.mesh(), &pair.mesh0) {
        return Err(Error::MeshMismatch);
    }
    FEFunction::from_nodal(&pair.mesh_t, f.values().to_vec())
}

fn check_form_inputs(u: &FEFunction, v: &FEFunction, coeffs: &ElementCoeffs) -> Result<()> {
    if !u.same_mesh(v) || u.mesh().num_elements() != coeffs.len() {
        return Err(Error::MeshMismatch);
    }
    Ok(())
}

/// Local L2 pairing `u_loc^T M_e v_loc` with the exact P1 mass matrix,
/// using `M_e = (area/12) (I + ones)`.
fn local_l2(area: f64, u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let su: f64 = u.iter().sum();
    let sv: f64 = v.iter().sum();
    area / 12.0 * (dot + su * sv)
}

/// Left-hand perturbation form on the unperturbed mesh:
/// `sum_j [ |det S_j| (P_j grad u, grad v) + d_j (grad u, grad v) - lambda_ref d_j (u, v) ]`.
pub fn tilde_a(
    u: &FEFunction,
    v: &FEFunction,
    coeffs: &ElementCoeffs,
    lambda_ref: f64,
) -> Result<f64> {
    check_form_inputs(u, v, coeffs)?;
    let mesh = u.mesh();
    let mut total = 0.0;
    for (j, c) in coeffs.coeffs().iter().enumerate() {
        let tri = mesh.element_points(j);
        let area = mesh.element_area(j);
        let grads = shape_gradients(&tri);
        let el = mesh.elements()[j];
        let uv = el.map(|n| u.values()[n]);
        let vv = el.map(|n| v.values()[n]);
        let mut gu = nalgebra::Vector2::zeros();
        let mut gv = nalgebra::Vector2::zeros();
        for a in 0..3 {
            gu += uv[a] * grads[a];
            gv += vv[a] * grads[a];
        }
        let grad_term = (c.det * (c.p * gu).dot(&gv) + c.d * gu.dot(&gv)) * area;
        total += grad_term - lambda_ref * c.d * local_l2(area, uv, vv);
    }
    Ok(total)
}

/// Right-hand perturbation form, with the weight chosen by `mode`.
pub fn tilde_b(
    u: &FEFunction,
    v: &FEFunction,
    coeffs: &ElementCoeffs,
    mode: WeightMode,
) -> Result<f64> {
    check_form_inputs(u, v, coeffs)?;
    let mesh = u.mesh();
    let mut total = 0.0;
    for (j, c) in coeffs.coeffs().iter().enumerate() {
        let area = mesh.element_area(j);
        let el = mesh.elements()[j];
        let uv = el.map(|n| u.values()[n]);
        let vv = el.map(|n| v.values()[n]);
        let w = match mode {
            WeightMode::PaperD => c.d,
            WeightMode::Det => c.det,
        };
        total += w * local_l2(area, uv, vv);
    }
    Ok(total)
}

/// Index range `first..=last` (1-based) of the clustered eigenvalues, with an
/// optional reference eigenvalue; when absent the arithmetic mean of the
/// unperturbed cluster is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub first: usize,
    pub last: usize,
    #[serde(default)]
    pub lambda_ref: Option<f64>,
}

impl ClusterSpec {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::DimensionMismatch(format!(
                "cluster indices must satisfy 1 <= first <= last, got {first}..{last}"
            )));
        }
        Ok(Self {
            first,
            last,
            lambda_ref: None,
        })
    }

    pub fn with_lambda_ref(mut self, lambda_ref: f64) -> Self {
        self.lambda_ref = Some(lambda_ref);
        self
    }

    /// Cluster size M.
    pub fn size(&self) -> usize {
        self.last - self.first + 1
    }
}

/// The dense pencil of the small generalized eigenproblem.
#[derive(Debug, Clone)]
pub struct SmallSystem {
    pub mt: DMatrix<f64>,
    pub nt: DMatrix<f64>,
    pub weight_mode: WeightMode,
}

/// Condition number cap of the pulled-back basis Gram matrix.
const GRAM_COND_LIMIT: f64 = 1e8;

/// Builds `(M_t)_{ij} = tilde_a(phi~_i, phi_j)` and `(N_t)_{ij} =
/// tilde_b(phi~_i, phi_j)`: rows follow the pulled-back perturbed basis,
/// columns the unperturbed basis.
pub fn build_small_system(
    basis_tilde: &[FEFunction],
    basis_e: &[FEFunction],
    coeffs: &ElementCoeffs,
    lambda_ref: f64,
    mode: WeightMode,
) -> Result<SmallSystem> {
    let m = basis_tilde.len();
    if m == 0 || basis_e.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "bases must be nonempty and equal length, got {} and {}",
            m,
            basis_e.len()
        )));
    }
    for f in basis_tilde.iter().chain(basis_e.iter()) {
        if !f.same_mesh(&basis_tilde[0]) {
            return Err(Error::MeshMismatch);
        }
    }
    // Linear independence of the pulled-back basis, via its L2 Gram matrix.
    let mass = mass_full(basis_tilde[0].mesh())?;
    let gram = DMatrix::from_fn(m, m, |i, j| {
        mass.quad(basis_tilde[i].values(), basis_tilde[j].values())
    });
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if cond > GRAM_COND_LIMIT {
        return Err(Error::RankDeficientBasis { cond });
    }

    let mut mt = DMatrix::zeros(m, m);
    let mut nt = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mt[(i, j)] = tilde_a(&basis_tilde[i], &basis_e[j], coeffs, lambda_ref)?;
            nt[(i, j)] = tilde_b(&basis_tilde[i], &basis_e[j], coeffs, mode)?;
        }
    }
    Ok(SmallSystem {
        mt,
        nt,
        weight_mode: mode,
    })
}

/// Output of the stabilization pipeline.
#[derive(Debug)]
pub struct StabilizedCluster<'p> {
    /// Difference quotients, ascending.
    pub quotients: Vec<f64>,
    /// Combination coefficients; column i recombines the perturbed-domain
    /// eigenvectors into the i-th stabilized eigenfunction.
    pub coefficients: DMatrix<f64>,
    /// Stabilized eigenfunctions on the perturbed mesh, L2-normalized, sign
    /// fixed (largest-magnitude nodal value positive).
    pub functions_on_kt: Vec<FEFunction<'p>>,
    /// Their pull-backs onto the unperturbed mesh (same nodal values).
    pub functions_on_k0: Vec<FEFunction<'p>>,
    /// Unperturbed-domain eigenfunctions spanning the cluster (step 1).
    pub basis_on_k0: Vec<FEFunction<'p>>,
    /// Raw perturbed-domain eigenfunctions (step 2); what a standard solve
    /// returns for the cluster.
    pub standard_on_kt: Vec<FEFunction<'p>>,
    /// Reference eigenvalue used in the left-hand form.
    pub lambda_ref: f64,
    /// Cluster eigenvalues of the unperturbed mesh, ascending.
    pub lambda0: Vec<f64>,
    /// Cluster eigenvalues of the perturbed mesh, ascending.
    pub lambda_t: Vec<f64>,
    /// Worst relative eigensolver residual across both solves.
    pub max_residual: f64,
    /// Set when sorted quotients coincide within 1e-10; the output basis is
    /// then solver-arbitrary inside the tied group.
    pub unresolved_subcluster: bool,
}

/// Thread budget for the pipeline: `EIGSTAB_THREADS` if set, otherwise the
/// machine parallelism.
fn thread_budget() -> usize {
    match std::env::var("EIGSTAB_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => {
                log::warn!("ignoring invalid EIGSTAB_THREADS value {raw:?}");
                1
            }
        },
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

/// Runs the full pipeline: eigensolves on both meshes, pull-back, small
/// pencil, and recombination into stabilized eigenfunctions.
pub fn stabilize_cluster<'p>(
    pair: &'p MatchedMeshPair,
    cluster: &ClusterSpec,
    mode: WeightMode,
    opts: &SolverOpts,
) -> Result<StabilizedCluster<'p>> {
    if pair.t() <= 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    let m_count = cluster.last;
    let (a0, b0, dofs0) = assemble(&pair.mesh0)?;
    let (at, bt, dofst) = assemble(&pair.mesh_t)?;

    // The two eigensolves are independent; run them concurrently when the
    // thread budget allows.
    let (res0, res_t) = if thread_budget() >= 2 {
        std::thread::scope(|scope| {
            let handle = scope.spawn(|| smallest_pairs(&a0, &b0, m_count, opts));
            let rt = smallest_pairs(&at, &bt, m_count, opts);
            (handle.join().expect("eigensolver thread panicked"), rt)
        })
    } else {
        (
            smallest_pairs(&a0, &b0, m_count, opts),
            smallest_pairs(&at, &bt, m_count, opts),
        )
    };
    let pairs0 = res0?;
    let pairs_t = res_t?;

    let max_residual = pairs0
        .iter()
        .map(|p| residual(&a0, &b0, p))
        .chain(pairs_t.iter().map(|p| residual(&at, &bt, p)))
        .fold(0.0_f64, f64::max);

    let slice0 = &pairs0[cluster.first - 1..cluster.last];
    let slice_t = &pairs_t[cluster.first - 1..cluster.last];
    let lambda0: Vec<f64> = slice0.iter().map(|p| p.value).collect();
    let lambda_t: Vec<f64> = slice_t.iter().map(|p| p.value).collect();

    let lambda_ref = cluster.lambda_ref.unwrap_or_else(|| {
        lambda0.iter().sum::<f64>() / lambda0.len() as f64
    });
    let spread = (lambda0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - lambda0.iter().cloned().fold(f64::INFINITY, f64::min))
        / lambda_ref.abs().max(f64::MIN_POSITIVE);
    if spread > 1e-6 {
        log::warn!(
            "unperturbed cluster is split by {spread:.3e} relative; \
             the discrete cluster is not exactly multiple and the quotients \
             carry an O(split) bias"
        );
    }

    let to_fn = |pairs: &[EigenPair], mesh, dofs| -> Result<Vec<FEFunction<'p>>> {
        pairs
            .iter()
            .map(|p| FEFunction::from_interior(mesh, dofs, &p.vector))
            .collect()
    };
    let basis_on_k0 = to_fn(slice0, &pair.mesh0, &dofs0)?;
    let standard_on_kt = to_fn(slice_t, &pair.mesh_t, &dofst)?;
    let basis_tilde: Vec<FEFunction> = standard_on_kt
        .iter()
        .map(|f| pull_back(f, pair))
        .collect::<Result<_>>()?;

    let coeffs = element_coeffs(pair)?;
    let system = build_small_system(&basis_tilde, &basis_on_k0, &coeffs, lambda_ref, mode)?;
    // Expanding u~_i = sum_k s_k phi~_k in the variational identity gives
    // sum_k s_k (Mt)_{kj} = mu sum_k s_k (Nt)_{kj} for every j: sigma is a
    // left eigenvector of (Mt, Nt), i.e. a right eigenvector of the
    // transposed pencil. The eigenvalues are unaffected by the transpose.
    let small_pairs = dense_gep(&system.mt.transpose(), &system.nt.transpose())?;

    let max_imag = small_pairs
        .iter()
        .map(|p| p.value.im.abs() / (1.0 + p.value.re.abs()))
        .fold(0.0_f64, f64::max);
    if max_imag > 1e-8 {
        return Err(Error::ComplexQuotients { max_imag });
    }

    let m = cluster.size();
    let mut coefficients = DMatrix::zeros(m, m);
    for (i, sp) in small_pairs.iter().enumerate() {
        let sigma = realify(&sp.vector)?;
        coefficients.set_column(i, &sigma);
    }

    let quotients: Vec<f64> = small_pairs.iter().map(|p| p.value.re).collect();
    let unresolved_subcluster = quotients.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-10);
    if unresolved_subcluster {
        log::warn!(
            "difference quotients coincide within 1e-10; keeping solver order \
             (unresolved sub-cluster)"
        );
    }

    let mass_t = mass_full(&pair.mesh_t)?;
    let mut functions_on_kt = Vec::with_capacity(m);
    let mut functions_on_k0 = Vec::with_capacity(m);
    for i in 0..m {
        let mut values = vec![0.0; pair.mesh_t.num_nodes()];
        for (k, f) in standard_on_kt.iter().enumerate() {
            let s = coefficients[(k, i)];
            for (val, &fv) in values.iter_mut().zip(f.values()) {
                *val += s * fv;
            }
        }
        let norm = mass_t.quad(&values, &values).max(0.0).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroFunction);
        }
        for v in &mut values {
            *v /= norm;
        }
        fix_sign(&mut values);
        functions_on_kt.push(FEFunction::from_nodal(&pair.mesh_t, values.clone())?);
        functions_on_k0.push(FEFunction::from_nodal(&pair.mesh0, values)?);
    }

    Ok(StabilizedCluster {
        quotients,
        coefficients,
        functions_on_kt,
        functions_on_k0,
        basis_on_k0,
        standard_on_kt,
        lambda_ref,
        lambda0,
        lambda_t,
        max_residual,
        unresolved_subcluster,
    })
}

/// Rotates a complex vector onto the real axis (phase of its largest entry)
/// and strips the imaginary part after checking it is negligible. The result
/// is unit-norm with the largest-magnitude entry positive.
fn realify(vector: &DVector<nalgebra::Complex<f64>>) -> Result<DVector<f64>> {
    let mut k_max = 0;
    for (k, z) in vector.iter().enumerate() {
        if z.norm() > vector[k_max].norm() {
            k_max = k;
        }
    }
    let lead = vector[k_max];
    if lead.norm() == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let phase = lead / nalgebra::Complex::new(lead.norm(), 0.0);
    let rotated = vector.map(|z| z * phase.conj());
    let imag_norm = rotated.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let full_norm = vector.norm();
    if imag_norm > 1e-8 * full_norm {
        return Err(Error::ComplexQuotients {
            max_imag: imag_norm / full_norm,
        });
    }
    let mut real = DVector::from_iterator(vector.len(), rotated.iter().map(|z| z.re));
    let norm = real.norm();
    real /= norm;
    let mut slice: Vec<f64> = real.iter().copied().collect();
    fix_sign(&mut slice);
    Ok(DVector::from_vec(slice))
}

/// Deterministic sign convention: the first entry of largest magnitude is
/// made positive.
fn fix_sign(values: &mut [f64]) {
    let mut k_max = 0;
    for (k, v) in values.iter().enumerate() {
        if v.abs() > values[k_max].abs() {
            k_max = k;
        }
    }
    if values[k_max] < 0.0 {
        for v in values.iter_mut() {
            *v = -*v;
        }
    }
}
