//! P1 Lagrange assembly, Dirichlet elimination and FE function evaluation.
//!
//! Local matrices use exact closed-form integration (no quadrature), so the
//! discrete transformation identities used by the stabilization hold to
//! rounding accuracy. Assembly walks the elements in order and accumulates
//! into a fixed sparsity pattern, which makes matrix entries reproducible
//! bit-for-bit for a given mesh.

use nalgebra::{DVector, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{signed_area, Point2};
use crate::mesh::{locate_point, TriMesh};

/// Bijection between interior (non-boundary) nodes and reduced-system rows.
#[derive(Debug, Clone)]
pub struct DofMap {
    interior_of_node: Vec<Option<usize>>,
    node_of_interior: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut interior_of_node = vec![None; mesh.num_nodes()];
        let mut node_of_interior = Vec::with_capacity(mesh.num_interior_nodes());
        for (node, slot) in interior_of_node.iter_mut().enumerate() {
            if !mesh.is_boundary(node) {
                *slot = Some(node_of_interior.len());
                node_of_interior.push(node);
            }
        }
        Self {
            interior_of_node,
            node_of_interior,
        }
    }

    pub fn interior_of_node(&self, node: usize) -> Option<usize> {
        self.interior_of_node[node]
    }

    pub fn node_of_interior(&self, dof: usize) -> usize {
        self.node_of_interior[dof]
    }

    pub fn num_interior(&self) -> usize {
        self.node_of_interior.len()
    }
}

/// Symmetric sparse matrix in compressed-row storage (both triangles stored).
#[derive(Debug, Clone)]
pub struct SparseSym {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseSym {
    /// Builds a zero matrix with the given sparsity pattern; `neighbors[i]`
    /// must be sorted and include `i`.
    fn with_pattern(neighbors: Vec<Vec<usize>>) -> Self {
        let dim = neighbors.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &neighbors {
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        }
    }

    /// Builds a sparse matrix from a dense symmetric one, keeping nonzeros
    /// plus the diagonal. Intended for small systems and tests.
    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| m[(i, j)] != 0.0 || j == i).collect())
            .collect();
        let mut s = Self::with_pattern(neighbors);
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    s.add(i, j, m[(i, j)]);
                }
            }
        }
        s.check_symmetry(1e-14)?;
        Ok(s)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let k = self.col_idx[lo..hi]
            .binary_search(&j)
            .expect("entry outside sparsity pattern");
        self.values[lo + k] += v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[usize], &[f64])> {
        (0..self.dim).map(move |i| {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            (i, &self.col_idx[lo..hi], &self.values[lo..hi])
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = DVector::zeros(self.dim);
        for (i, cols, vals) in self.rows() {
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// Quadratic form `x^T A y`.
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let mut total = 0.0;
        for (i, cols, vals) in self.rows() {
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * y[j];
            }
            total += x[i] * s;
        }
        total
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (i, cols, vals) in self.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Verifies numeric symmetry and records the result in the flag.
    fn check_symmetry(&mut self, rel_tol: f64) -> Result<()> {
        let scale = self.max_abs();
        for (i, cols, vals) in self.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                if (v - self.get(j, i)).abs() > rel_tol * scale {
                    return Err(Error::DimensionMismatch(format!(
                        "assembled matrix asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        self.symmetric = true;
        Ok(())
    }
}

/// A P1 nodal field on a mesh. Dirichlet fields carry exact zeros on boundary
/// nodes.
#[derive(Debug, Clone)]
pub struct FEFunction<'m> {
    mesh: &'m TriMesh,
    values: Vec<f64>,
}

impl<'m> FEFunction<'m> {
    pub fn from_nodal(mesh: &'m TriMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodal values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(Self { mesh, values })
    }

    /// Expands an interior coefficient vector to a nodal field with zero
    /// boundary values.
    pub fn from_interior(mesh: &'m TriMesh, dofs: &DofMap, interior: &DVector<f64>) -> Result<Self> {
        if interior.len() != dofs.num_interior() {
            return Err(Error::DimensionMismatch(format!(
                "{} interior values for {} interior nodes",
                interior.len(),
                dofs.num_interior()
            )));
        }
        let mut values = vec![0.0; mesh.num_nodes()];
        for dof in 0..dofs.num_interior() {
            values[dofs.node_of_interior(dof)] = interior[dof];
        }
        Ok(Self { mesh, values })
    }

    /// Interpolates a closed-form function at the nodes. Boundary values are
    /// zeroed when `dirichlet` is set.
    pub fn interpolate(mesh: &'m TriMesh, f: impl Fn(Point2) -> f64, dirichlet: bool) -> Self {
        let values = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if dirichlet && mesh.is_boundary(i) {
                    0.0
                } else {
                    f(p)
                }
            })
            .collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &'m TriMesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn interior(&self, dofs: &DofMap) -> DVector<f64> {
        DVector::from_iterator(
            dofs.num_interior(),
            (0..dofs.num_interior()).map(|d| self.values[dofs.node_of_interior(d)]),
        )
    }

    pub fn same_mesh(&self, other: &FEFunction) -> bool {
        std::ptr::eq(self.mesh, other.mesh)
    }

    /// Constant gradient of the field on element `j`.
    pub fn element_gradient(&self, j: usize) -> Vector2<f64> {
        let el = self.mesh.elements()[j];
        let grads = shape_gradients(&self.mesh.element_points(j));
        let mut g = Vector2::zeros();
        for (a, &node) in el.iter().enumerate() {
            g += self.values[node] * grads[a];
        }
        g
    }
}

/// Gradients of the three barycentric shape functions on a triangle.
pub fn shape_gradients(tri: &[Point2; 3]) -> [Vector2<f64>; 3] {
    let area2 = 2.0 * signed_area(tri[0], tri[1], tri[2]);
    [
        Vector2::new(tri[1].y - tri[2].y, tri[2].x - tri[1].x) / area2,
        Vector2::new(tri[2].y - tri[0].y, tri[0].x - tri[2].x) / area2,
        Vector2::new(tri[0].y - tri[1].y, tri[1].x - tri[0].x) / area2,
    ]
}

/// Exact P1 stiffness matrix of one triangle.
pub fn local_stiffness(tri: &[Point2; 3]) -> Result<Matrix3<f64>> {
    let area = signed_area(tri[0], tri[1], tri[2]);
    if area <= 0.0 {
        return Err(Error::DegenerateTriangle { area });
    }
    let b = [tri[1].y - tri[2].y, tri[2].y - tri[0].y, tri[0].y - tri[1].y];
    let c = [tri[2].x - tri[1].x, tri[0].x - tri[2].x, tri[1].x - tri[0].x];
    let mut k = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            k[(i, j)] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    Ok(k)
}

/// Exact P1 mass matrix of one triangle: `(area/12) * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass(tri: &[Point2; 3]) -> Result<Matrix3<f64>> {
    let area = signed_area(tri[0], tri[1], tri[2]);
    if area <= 0.0 {
        return Err(Error::DegenerateTriangle { area });
    }
    let off = area / 12.0;
    let diag = area / 6.0;
    Ok(Matrix3::new(
        diag, off, off, off, diag, off, off, off, diag,
    ))
}

fn interior_pattern(mesh: &TriMesh, dofs: &DofMap) -> Vec<Vec<usize>> {
    let n = dofs.num_interior();
    let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for el in mesh.elements() {
        for &a in el {
            let Some(ia) = dofs.interior_of_node(a) else {
                continue;
            };
            for &b in el {
                if let Some(ib) = dofs.interior_of_node(b) {
                    neighbors[ia].push(ib);
                }
            }
        }
    }
    for row in &mut neighbors {
        row.sort_unstable();
        row.dedup();
    }
    neighbors
}

fn full_pattern(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let n = mesh.num_nodes();
    let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for el in mesh.elements() {
        for &a in el {
            for &b in el {
                neighbors[a].push(b);
            }
        }
    }
    for row in &mut neighbors {
        row.sort_unstable();
        row.dedup();
    }
    neighbors
}

/// Assembles the reduced stiffness and mass matrices (boundary rows and
/// columns eliminated) together with the DOF map.
pub fn assemble(mesh: &TriMesh) -> Result<(SparseSym, SparseSym, DofMap)> {
    let dofs = DofMap::new(mesh);
    let mut a = SparseSym::with_pattern(interior_pattern(mesh, &dofs));
    let mut b = SparseSym::with_pattern(interior_pattern(mesh, &dofs));
    for j in 0..mesh.num_elements() {
        let tri = mesh.element_points(j);
        let k_local = local_stiffness(&tri)?;
        let m_local = local_mass(&tri)?;
        let el = mesh.elements()[j];
        for (la, &na) in el.iter().enumerate() {
            let Some(ia) = dofs.interior_of_node(na) else {
                continue;
            };
            for (lb, &nb) in el.iter().enumerate() {
                if let Some(ib) = dofs.interior_of_node(nb) {
                    a.add(ia, ib, k_local[(la, lb)]);
                    b.add(ia, ib, m_local[(la, lb)]);
                }
            }
        }
    }
    a.check_symmetry(1e-14)?;
    b.check_symmetry(1e-14)?;
    Ok((a, b, dofs))
}

/// Mass matrix over all nodes (no boundary elimination); used for L2 norms of
/// fields with nonzero boundary values.
pub fn mass_full(mesh: &TriMesh) -> Result<SparseSym> {
    let mut b = SparseSym::with_pattern(full_pattern(mesh));
    for j in 0..mesh.num_elements() {
        let m_local = local_mass(&mesh.element_points(j))?;
        let el = mesh.elements()[j];
        for (la, &na) in el.iter().enumerate() {
            for (lb, &nb) in el.iter().enumerate() {
                b.add(na, nb, m_local[(la, lb)]);
            }
        }
    }
    b.check_symmetry(1e-14)?;
    Ok(b)
}

/// Barycentric interpolation of the field at `pt`.
pub fn evaluate(f: &FEFunction, pt: Point2, tol: f64) -> Result<f64> {
    let (j, bary) = locate_point(f.mesh(), pt, tol)?;
    let el = f.mesh().elements()[j];
    Ok(bary
        .iter()
        .zip(el.iter())
        .map(|(&l, &node)| l * f.values()[node])
        .sum())
}

/// L2 inner product of two Dirichlet fields through the reduced mass matrix.
pub fn inner(f: &FEFunction, g: &FEFunction, b: &SparseSym, dofs: &DofMap) -> Result<f64> {
    if !f.same_mesh(g) {
        return Err(Error::MeshMismatch);
    }
    if b.dim() != dofs.num_interior() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {} vs {} interior nodes",
            b.dim(),
            dofs.num_interior()
        )));
    }
    let x = f.interior(dofs);
    let y = g.interior(dofs);
    Ok(b.quad(x.as_slice(), y.as_slice()))
}

/// L2 norm of a Dirichlet field.
pub fn norm(f: &FEFunction, b: &SparseSym, dofs: &DofMap) -> Result<f64> {
    Ok(inner(f, f, b, dofs)?.max(0.0).sqrt())
}
