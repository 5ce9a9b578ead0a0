//! Shared builders and property checks for the integration suites.

use eigstab::eigensolve::{residual, smallest_pairs, SolverOpts};
use eigstab::fem::{assemble, FEFunction};
use eigstab::geometry::{
    fan_macro_triangulation, macro_maps, perturb_polygon, unit_square, PerturbationSpec, Point2,
    PolygonSpec,
};
use eigstab::mesh::{rect_mesh, transport, MatchedMeshPair, MeshPattern, TriMesh};
use eigstab::metrics::{antisymmetry, ReflectionAxis};
use eigstab::stabilize::{
    build_small_system, element_coeffs, pull_back, tilde_a, tilde_b, WeightMode,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const STRETCH_DIRECTION: [f64; 8] = [0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const DILATION_DIRECTION: [f64; 8] = [0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0];

pub fn square_pair(direction: &[f64], n: usize, t: f64, pattern: MeshPattern) -> MatchedMeshPair {
    let square = unit_square();
    let fan = fan_macro_triangulation(&square).unwrap();
    let spec = PerturbationSpec::new(direction.to_vec(), t).unwrap();
    let p_t = perturb_polygon(&square, &spec).unwrap();
    let maps = macro_maps(&fan, &p_t).unwrap();
    let mesh0 = rect_mesh(n, 1.0, 1.0, pattern).unwrap();
    transport(mesh0, &fan, &maps, t).unwrap()
}

pub fn stretch_pair(n: usize, t: f64, pattern: MeshPattern) -> MatchedMeshPair {
    square_pair(&STRETCH_DIRECTION, n, t, pattern)
}

pub fn dilation_pair(n: usize, t: f64, pattern: MeshPattern) -> MatchedMeshPair {
    square_pair(&DILATION_DIRECTION, n, t, pattern)
}

/// Random convex polygon: angle-sorted points on a randomly scaled ellipse.
pub fn random_convex_polygon(rng: &mut ChaCha8Rng) -> PolygonSpec {
    loop {
        let k = rng.random_range(3..=6);
        let rx: f64 = rng.random_range(0.5..1.5);
        let ry: f64 = rng.random_range(0.5..1.5);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut angles: Vec<f64> = (0..k)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Degenerate spacing makes near-collinear vertices; retry.
        let min_gap = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(std::f64::consts::TAU + angles[0] - angles[k - 1], f64::min);
        if min_gap < 0.3 {
            continue;
        }
        let vertices = angles
            .iter()
            .map(|&a| Point2::new(rx * (a + phase).cos(), ry * (a + phase).sin()))
            .collect();
        if let Ok(p) = PolygonSpec::new(vertices) {
            if p.is_convex() {
                return p;
            }
        }
    }
}

pub fn random_pattern(rng: &mut ChaCha8Rng) -> MeshPattern {
    match rng.random_range(0..3) {
        0 => MeshPattern::Left,
        1 => MeshPattern::Right,
        _ => MeshPattern::Crossed,
    }
}

/// Random small vertex perturbation that keeps the polygon simple and every
/// fan macro triangle well oriented (thin fan triangles of an elongated
/// polygon can otherwise flip, which transport rightly refuses).
pub fn random_perturbation(rng: &mut ChaCha8Rng, polygon: &PolygonSpec) -> PerturbationSpec {
    let k = polygon.len();
    let fan = fan_macro_triangulation(polygon).unwrap();
    loop {
        let direction: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(1e-4..0.05);
        let spec = PerturbationSpec::new(direction, t).unwrap();
        let Ok(perturbed) = perturb_polygon(polygon, &spec) else {
            continue;
        };
        match macro_maps(&fan, &perturbed) {
            Ok(maps) if maps.iter().all(|m| m.det() > 0.1) => return spec,
            _ => continue,
        }
    }
}

pub fn random_nodal(rng: &mut ChaCha8Rng, mesh: &TriMesh) -> Vec<f64> {
    (0..mesh.num_nodes())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect()
}

/// Bilinear-form symmetry: both perturbation forms are symmetric in their
/// arguments because every P_j is symmetric.
pub fn check_bilinear_symmetry(rng: &mut ChaCha8Rng) {
    let t = rng.random_range(0.01..0.3);
    let n = rng.random_range(2..=5);
    let pattern = random_pattern(rng);
    let pair = if rng.random_range(0..2) == 0 {
        stretch_pair(n, t, pattern)
    } else {
        dilation_pair(n, t, pattern)
    };
    let coeffs = element_coeffs(&pair).unwrap();
    let u = FEFunction::from_nodal(&pair.mesh0, random_nodal(rng, &pair.mesh0)).unwrap();
    let v = FEFunction::from_nodal(&pair.mesh0, random_nodal(rng, &pair.mesh0)).unwrap();
    let lambda = rng.random_range(0.0..100.0);
    let a_uv = tilde_a(&u, &v, &coeffs, lambda).unwrap();
    let a_vu = tilde_a(&v, &u, &coeffs, lambda).unwrap();
    let scale = a_uv.abs() + a_vu.abs() + 1.0;
    assert!(
        (a_uv - a_vu).abs() <= 1e-11 * scale,
        "tilde_a asymmetric: {a_uv} vs {a_vu}"
    );
    for mode in [WeightMode::PaperD, WeightMode::Det] {
        let b_uv = tilde_b(&u, &v, &coeffs, mode).unwrap();
        let b_vu = tilde_b(&v, &u, &coeffs, mode).unwrap();
        assert!(
            (b_uv - b_vu).abs() <= 1e-11 * (b_uv.abs() + b_vu.abs() + 1.0),
            "tilde_b asymmetric: {b_uv} vs {b_vu}"
        );
    }
}

/// Area conservation: element areas tile the polygon before and after
/// transport.
pub fn check_area_conservation(rng: &mut ChaCha8Rng) {
    let polygon = random_convex_polygon(rng);
    let fan = fan_macro_triangulation(&polygon).unwrap();
    let spec = random_perturbation(rng, &polygon);
    let perturbed = perturb_polygon(&polygon, &spec).unwrap();
    let maps = macro_maps(&fan, &perturbed).unwrap();
    let mesh0 = eigstab::mesh::polygon_mesh(&fan, rng.random_range(2..=4)).unwrap();
    let pair = transport(mesh0, &fan, &maps, spec.magnitude).unwrap();
    let rel0 = (pair.mesh0.total_area() - polygon.area()).abs() / polygon.area();
    let rel_t = (pair.mesh_t.total_area() - perturbed.area()).abs() / perturbed.area();
    assert!(rel0 <= 1e-12, "unperturbed area off by {rel0:e}");
    assert!(rel_t <= 1e-12, "perturbed area off by {rel_t:e}");
}

/// Pull-back exactness: nodal values copy verbatim and the transformed
/// stiffness sum reproduces the perturbed-mesh stiffness form.
pub fn check_pull_back_exactness(rng: &mut ChaCha8Rng) {
    let t = rng.random_range(0.01..0.3);
    let n = rng.random_range(2..=5);
    let pair = stretch_pair(n, t, random_pattern(rng));
    let coeffs = element_coeffs(&pair).unwrap();
    let u = FEFunction::from_nodal(&pair.mesh_t, random_nodal(rng, &pair.mesh_t)).unwrap();
    let v = FEFunction::from_nodal(&pair.mesh_t, random_nodal(rng, &pair.mesh_t)).unwrap();
    let ut = pull_back(&u, &pair).unwrap();
    let vt = pull_back(&v, &pair).unwrap();
    assert_eq!(ut.values(), u.values());

    let mut transformed = 0.0;
    let mut direct = 0.0;
    for (j, c) in coeffs.coeffs().iter().enumerate() {
        transformed += c.det
            * (c.inv_t * ut.element_gradient(j)).dot(&(c.inv_t * vt.element_gradient(j)))
            * pair.mesh0.element_area(j);
        direct +=
            u.element_gradient(j).dot(&v.element_gradient(j)) * pair.mesh_t.element_area(j);
    }
    let scale = transformed.abs() + direct.abs() + 1e-30;
    assert!(
        (transformed - direct).abs() <= 1e-12 * scale,
        "pull-back stiffness identity off: {transformed} vs {direct}"
    );
}

/// Permuting the input bases leaves the sorted quotients unchanged.
pub fn check_permutation_invariance(rng: &mut ChaCha8Rng) {
    let t = rng.random_range(0.01..0.3);
    let n = rng.random_range(3..=5);
    let pair = stretch_pair(n, t, random_pattern(rng));
    let (a0, b0, dofs0) = assemble(&pair.mesh0).unwrap();
    let (at, bt, dofst) = assemble(&pair.mesh_t).unwrap();
    let opts = SolverOpts::default();
    let p0 = smallest_pairs(&a0, &b0, 3, &opts).unwrap();
    let pt = smallest_pairs(&at, &bt, 3, &opts).unwrap();
    let lambda_ref = (p0[1].value + p0[2].value) / 2.0;
    let coeffs = element_coeffs(&pair).unwrap();

    let phi: Vec<FEFunction> = p0[1..3]
        .iter()
        .map(|p| FEFunction::from_interior(&pair.mesh0, &dofs0, &p.vector).unwrap())
        .collect();
    let phi_tilde: Vec<FEFunction> = pt[1..3]
        .iter()
        .map(|p| {
            let f = FEFunction::from_interior(&pair.mesh_t, &dofst, &p.vector).unwrap();
            pull_back(&f, &pair).unwrap()
        })
        .collect();

    let sorted_mus = |tilde: &[FEFunction], basis: &[FEFunction]| -> Vec<f64> {
        let sys = build_small_system(tilde, basis, &coeffs, lambda_ref, WeightMode::Det).unwrap();
        eigstab::eigensolve::dense_gep(&sys.mt.transpose(), &sys.nt.transpose())
            .unwrap()
            .iter()
            .map(|p| p.value.re)
            .collect()
    };
    let base = sorted_mus(&phi_tilde, &phi);
    let permuted = sorted_mus(
        &[phi_tilde[1].clone(), phi_tilde[0].clone()],
        &[phi[1].clone(), phi[0].clone()],
    );
    for (x, y) in base.iter().zip(&permuted) {
        assert!(
            (x - y).abs() <= 1e-10 * (1.0 + x.abs()),
            "sorted quotients changed under permutation: {x} vs {y}"
        );
    }
}

/// Antisymmetry is invariant under sign flips and nonzero scaling and stays
/// in [0, 2].
pub fn check_antisymmetry_invariance(rng: &mut ChaCha8Rng) {
    let n = rng.random_range(3..=7);
    let mesh = rect_mesh(n, 1.0, 1.0, MeshPattern::Crossed).unwrap();
    let tol = 1e-10 * mesh.diameter();
    let axis = if rng.random_range(0..2) == 0 {
        ReflectionAxis::VerticalLine(0.5)
    } else {
        ReflectionAxis::HorizontalLine(0.5)
    };
    let values = random_nodal(rng, &mesh);
    let u = FEFunction::from_nodal(&mesh, values.clone()).unwrap();
    let a = antisymmetry(&u, &axis, tol).unwrap();
    assert!((0.0..=2.0 + 1e-12).contains(&a), "A out of range: {a}");

    let neg = FEFunction::from_nodal(&mesh, values.iter().map(|v| -v).collect()).unwrap();
    let a_neg = antisymmetry(&neg, &axis, tol).unwrap();
    assert!((a - a_neg).abs() <= 1e-11 * (1.0 + a), "sign variance: {a} vs {a_neg}");

    let c: f64 = rng.random_range(0.1..10.0);
    let scaled = FEFunction::from_nodal(&mesh, values.iter().map(|v| c * v).collect()).unwrap();
    let a_scaled = antisymmetry(&scaled, &axis, tol).unwrap();
    assert!(
        (a - a_scaled).abs() <= 1e-10 * (1.0 + a),
        "scale variance: {a} vs {a_scaled}"
    );
}

/// Solver batches are B-orthonormal with ascending positive eigenvalues and
/// tight residuals.
pub fn check_b_gram_orthonormality(rng: &mut ChaCha8Rng) {
    let n = rng.random_range(3..=8);
    let w = rng.random_range(0.6..1.5);
    let h = rng.random_range(0.6..1.5);
    let mesh = rect_mesh(n, w, h, random_pattern(rng)).unwrap();
    let (a, b, _) = assemble(&mesh).unwrap();
    let m = rng.random_range(1..=3.min(a.dim()));
    let pairs = smallest_pairs(&a, &b, m, &SolverOpts::default()).unwrap();
    assert!(pairs[0].value > 0.0);
    for win in pairs.windows(2) {
        assert!(win[0].value <= win[1].value, "eigenvalues not ascending");
    }
    for (i, p) in pairs.iter().enumerate() {
        assert!(residual(&a, &b, p) <= 1e-10, "residual too large");
        for (j, q) in pairs.iter().enumerate() {
            let g = b.quad(p.vector.as_slice(), q.vector.as_slice());
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!(
                (g - expected).abs() <= 1e-10,
                "B-Gram deviates at ({i},{j}): {g}"
            );
        }
    }
}
