//! Structured triangulations and affine mesh transport.
//!
//! Meshes of the unperturbed polygon are transported node-by-node through the
//! macro maps onto the perturbed polygon. Both meshes share connectivity
//! arrays, so P1 functions pull back exactly (nodal values are preserved) and
//! every element pair is related by a single affine map whose linear part
//! drives the perturbation coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{barycentric, signed_area, AffineMap2, MacroTriangulation, Point2};

/// Diagonal pattern for rectangle meshes.
///
/// `Left` cuts each cell from its bottom-left to its top-right corner, `Right`
/// the other way, `Crossed` adds the cell center and cuts both ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshPattern {
    Left,
    Right,
    Crossed,
}

/// A triangulation: nodes, counter-clockwise elements, boundary node set and
/// the macro-triangle index of each element.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point2>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    macro_id: Vec<usize>,
    diameter: f64,
    locator: Locator,
}

impl TriMesh {
    fn new(nodes: Vec<Point2>, elements: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        let macro_id = vec![0; elements.len()];
        Self::with_macro_ids(nodes, elements, boundary, macro_id)
    }

    fn with_macro_ids(
        nodes: Vec<Point2>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        macro_id: Vec<usize>,
    ) -> Result<Self> {
        assert_eq!(boundary.len(), nodes.len());
        assert_eq!(macro_id.len(), elements.len());
        let diameter = bbox_diameter(&nodes);
        for (j, el) in elements.iter().enumerate() {
            let area = signed_area(nodes[el[0]], nodes[el[1]], nodes[el[2]]);
            if area <= 0.0 {
                return Err(Error::InvertedElement { element: j });
            }
        }
        let boundary_nodes = boundary
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        let locator = Locator::build(&nodes, &elements);
        Ok(Self {
            nodes,
            elements,
            boundary,
            boundary_nodes,
            macro_id,
            diameter,
            locator,
        })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Sorted indices of the nodes on the domain boundary.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.nodes.len() - self.boundary_nodes.len()
    }

    /// Macro-triangle index of each element (all zero until a transport
    /// assigns them against a concrete macro triangulation).
    pub fn macro_ids(&self) -> &[usize] {
        &self.macro_id
    }

    pub fn element_points(&self, j: usize) -> [Point2; 3] {
        let [a, b, c] = self.elements[j];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn element_area(&self, j: usize) -> f64 {
        let [a, b, c] = self.element_points(j);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|j| self.element_area(j)).sum()
    }

    /// Bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

fn bbox_diameter(nodes: &[Point2]) -> f64 {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in nodes {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    (xmax - xmin).hypot(ymax - ymin)
}

/// Uniform bin grid over element bounding boxes for fast point location.
#[derive(Debug, Clone)]
struct Locator {
    x0: f64,
    y0: f64,
    inv_hx: f64,
    inv_hy: f64,
    gx: usize,
    gy: usize,
    bins: Vec<Vec<usize>>,
}

impl Locator {
    fn build(nodes: &[Point2], elements: &[[usize; 3]]) -> Self {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in nodes {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let g = (((elements.len().max(1)) as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 512);
        let (gx, gy) = (g, g);
        let wx = (xmax - xmin).max(f64::MIN_POSITIVE);
        let wy = (ymax - ymin).max(f64::MIN_POSITIVE);
        let mut bins = vec![Vec::new(); gx * gy];
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for (j, el) in elements.iter().enumerate() {
            let xs = [nodes[el[0]].x, nodes[el[1]].x, nodes[el[2]].x];
            let ys = [nodes[el[0]].y, nodes[el[1]].y, nodes[el[2]].y];
            let exmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let exmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let eymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let eymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let i0 = clampi((exmin - xmin) / wx * gx as f64, gx);
            let i1 = clampi((exmax - xmin) / wx * gx as f64, gx);
            let j0 = clampi((eymin - ymin) / wy * gy as f64, gy);
            let j1 = clampi((eymax - ymin) / wy * gy as f64, gy);
            for by in j0..=j1 {
                for bx in i0..=i1 {
                    bins[by * gx + bx].push(j);
                }
            }
        }
        Self {
            x0: xmin,
            y0: ymin,
            inv_hx: gx as f64 / wx,
            inv_hy: gy as f64 / wy,
            gx,
            gy,
            bins,
        }
    }

    fn candidates(&self, pt: Point2, ring: usize) -> impl Iterator<Item = usize> + '_ {
        let bx = (((pt.x - self.x0) * self.inv_hx).floor().max(0.0) as usize).min(self.gx - 1);
        let by = (((pt.y - self.y0) * self.inv_hy).floor().max(0.0) as usize).min(self.gy - 1);
        let x_lo = bx.saturating_sub(ring);
        let x_hi = (bx + ring).min(self.gx - 1);
        let y_lo = by.saturating_sub(ring);
        let y_hi = (by + ring).min(self.gy - 1);
        (y_lo..=y_hi).flat_map(move |y| {
            (x_lo..=x_hi).flat_map(move |x| self.bins[y * self.gx + x].iter().copied())
        })
    }
}

/// Structured rectangle mesh of `(0,width) x (0,height)` with cells of size
/// roughly `1/n`. Nodes are ordered row by row (ascending y, then x), with
/// crossed-pattern cell centers interleaved between lattice rows to keep the
/// matrix profile narrow.
pub fn rect_mesh(n: usize, width: f64, height: f64, pattern: MeshPattern) -> Result<TriMesh> {
    if n == 0 || width <= 0.0 || height <= 0.0 {
        return Err(Error::DimensionMismatch(format!(
            "rect_mesh requires n >= 1 and positive sides, got n={n}, {width} x {height}"
        )));
    }
    let nx = ((n as f64 * width).round() as usize).max(1);
    let ny = ((n as f64 * height).round() as usize).max(1);
    let hx = width / nx as f64;
    let hy = height / ny as f64;
    let crossed = pattern == MeshPattern::Crossed;
    let row_stride = if crossed { 2 * nx + 1 } else { nx + 1 };
    let lattice = |i: usize, j: usize| j * row_stride + i;
    let center = |i: usize, j: usize| j * row_stride + (nx + 1) + i;

    let num_nodes = (nx + 1) * (ny + 1) + if crossed { nx * ny } else { 0 };
    let mut nodes = Vec::with_capacity(num_nodes);
    let mut boundary = Vec::with_capacity(num_nodes);
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Point2::new(i as f64 * hx, j as f64 * hy));
            boundary.push(i == 0 || i == nx || j == 0 || j == ny);
        }
        if crossed && j < ny {
            for i in 0..nx {
                nodes.push(Point2::new((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy));
                boundary.push(false);
            }
        }
    }

    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = lattice(i, j);
            let b = lattice(i + 1, j);
            let c = lattice(i + 1, j + 1);
            let d = lattice(i, j + 1);
            match pattern {
                MeshPattern::Left => {
                    elements.push([a, b, c]);
                    elements.push([a, c, d]);
                }
                MeshPattern::Right => {
                    elements.push([a, b, d]);
                    elements.push([b, c, d]);
                }
                MeshPattern::Crossed => {
                    let m = center(i, j);
                    elements.push([a, b, m]);
                    elements.push([b, c, m]);
                    elements.push([c, d, m]);
                    elements.push([d, a, m]);
                }
            }
        }
    }
    TriMesh::new(nodes, elements, boundary)
}

/// Uniform refinement of the triangle `(0,0), (1,0), apex` into `4^levels`
/// elements via the barycentric lattice. Nodes are ordered row by row in the
/// lattice, which keeps the assembled matrix profile narrow; for the
/// equilateral apex the mesh is invariant under the triangle's symmetries.
pub fn triangle_mesh(apex: Point2, levels: u32) -> Result<TriMesh> {
    let v0 = Point2::new(0.0, 0.0);
    let v1 = Point2::new(1.0, 0.0);
    let area = signed_area(v0, v1, apex);
    if levels == 0 {
        return Err(Error::DimensionMismatch(
            "triangle_mesh requires levels >= 1".into(),
        ));
    }
    if area.abs() <= 1e-14 {
        return Err(Error::DegenerateTriangle { area });
    }
    if area < 0.0 {
        return Err(Error::NotCounterClockwise);
    }
    let l = 1usize << levels;
    let lf = l as f64;
    // Row i runs toward the apex; row length shrinks by one per row.
    let offset = |i: usize| i * (l + 1) - (i * i - i) / 2;
    let idx = |i: usize, j: usize| offset(i) + j;

    let num_nodes = (l + 1) * (l + 2) / 2;
    let mut nodes = Vec::with_capacity(num_nodes);
    let mut boundary = Vec::with_capacity(num_nodes);
    for i in 0..=l {
        for j in 0..=(l - i) {
            let s = j as f64 / lf;
            let r = i as f64 / lf;
            nodes.push(Point2::new(s * v1.x + r * apex.x, s * v1.y + r * apex.y));
            boundary.push(i == 0 || j == 0 || i + j == l);
        }
    }

    let mut elements = Vec::with_capacity(4usize.pow(levels));
    for i in 0..l {
        for j in 0..(l - i) {
            elements.push([idx(i, j), idx(i, j + 1), idx(i + 1, j)]);
            if i + j + 2 <= l {
                elements.push([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)]);
            }
        }
    }
    TriMesh::new(nodes, elements, boundary)
}

/// Mesh of a convex polygon: each fan macro triangle is refined `4^levels`
/// times on the barycentric lattice and the pieces are welded along shared
/// macro edges. Lattice nodes on a shared edge evaluate to bit-identical
/// coordinates from both sides, so welding by exact coordinate works. Every
/// element lies inside a single macro triangle, which is what the affine
/// transport needs.
pub fn polygon_mesh(macro_tri: &MacroTriangulation, levels: u32) -> Result<TriMesh> {
    if levels == 0 {
        return Err(Error::DimensionMismatch(
            "polygon_mesh requires levels >= 1".into(),
        ));
    }
    let k = macro_tri.polygon().len();
    let l = 1usize << levels;
    let lf = l as f64;
    let mut nodes: Vec<Point2> = Vec::new();
    let mut boundary: Vec<bool> = Vec::new();
    let mut elements: Vec<[usize; 3]> = Vec::new();
    let mut macro_id: Vec<usize> = Vec::new();
    let mut node_index: std::collections::HashMap<(u64, u64), usize> = std::collections::HashMap::new();

    for (m, &[a, b, c]) in macro_tri.triangles().iter().enumerate() {
        let [va, vb, vc] = macro_tri.triangle_points(m);
        // Polygon-boundary sides of this macro triangle: vertex indices
        // adjacent on the polygon (the fan interior diagonals are not).
        let adjacent = |u: usize, v: usize| {
            u == (v + 1) % k || v == (u + 1) % k
        };
        let ab_boundary = adjacent(a, b);
        let bc_boundary = adjacent(b, c);
        let ca_boundary = adjacent(c, a);

        let mut local = vec![0usize; (l + 1) * (l + 2) / 2];
        let offset = |i: usize| i * (l + 1) - (i * i - i) / 2;
        for i in 0..=l {
            for j in 0..=(l - i) {
                let s = j as f64 / lf;
                let r = i as f64 / lf;
                let p = Point2::new(
                    va.x + s * (vb.x - va.x) + r * (vc.x - va.x),
                    va.y + s * (vb.y - va.y) + r * (vc.y - va.y),
                );
                let key = (p.x.to_bits(), p.y.to_bits());
                let on_boundary = (i == 0 && ab_boundary)
                    || (j == 0 && ca_boundary)
                    || (i + j == l && bc_boundary);
                let idx = *node_index.entry(key).or_insert_with(|| {
                    nodes.push(p);
                    boundary.push(false);
                    nodes.len() - 1
                });
                boundary[idx] = boundary[idx] || on_boundary;
                local[offset(i) + j] = idx;
            }
        }
        for i in 0..l {
            for j in 0..(l - i) {
                elements.push([
                    local[offset(i) + j],
                    local[offset(i) + j + 1],
                    local[offset(i + 1) + j],
                ]);
                macro_id.push(m);
                if i + j + 2 <= l {
                    elements.push([
                        local[offset(i) + j + 1],
                        local[offset(i + 1) + j + 1],
                        local[offset(i + 1) + j],
                    ]);
                    macro_id.push(m);
                }
            }
        }
    }
    TriMesh::with_macro_ids(nodes, elements, boundary, macro_id)
}

/// Matched meshes of the unperturbed and perturbed domains: identical
/// connectivity, one affine map per element pair.
#[derive(Debug, Clone)]
pub struct MatchedMeshPair {
    pub mesh0: TriMesh,
    pub mesh_t: TriMesh,
    element_maps: Vec<AffineMap2>,
    t: f64,
}

impl MatchedMeshPair {
    pub fn element_maps(&self) -> &[AffineMap2] {
        &self.element_maps
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Transports `mesh0` through the macro maps: every node is mapped by the
/// macro triangle containing it, elements keep their connectivity, and each
/// element records the macro map it lives under. Fails if an element
/// straddles macro triangles whose maps disagree (the global map would not be
/// affine on it) or if a transported element inverts.
pub fn transport(
    mesh0: TriMesh,
    macro_tri: &MacroTriangulation,
    maps: &[AffineMap2],
    t: f64,
) -> Result<MatchedMeshPair> {
    if maps.len() != macro_tri.triangles().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} macro maps for {} macro triangles",
            maps.len(),
            macro_tri.triangles().len()
        )));
    }
    let bary_tol = 1e-12;
    let mut transported = Vec::with_capacity(mesh0.num_nodes());
    for (i, &p) in mesh0.nodes().iter().enumerate() {
        let m = macro_tri
            .containing_triangle(p, bary_tol)
            .ok_or(Error::NodeOutsideMacro { node: i })?;
        transported.push(maps[m].apply(p));
    }

    let geom_tol = 1e-12 * mesh0.diameter().max(bbox_diameter(&transported));
    let mut macro_id = Vec::with_capacity(mesh0.num_elements());
    let mut element_maps = Vec::with_capacity(mesh0.num_elements());
    for (j, el) in mesh0.elements().iter().enumerate() {
        let [a, b, c] = mesh0.element_points(j);
        let centroid = Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        let m = macro_tri
            .containing_triangle(centroid, bary_tol)
            .ok_or(Error::NodeOutsideMacro { node: el[0] })?;
        let map = maps[m];
        for (&src, &dst_idx) in [a, b, c].iter().zip(el.iter()) {
            if map.apply(src).distance(transported[dst_idx]) > geom_tol {
                return Err(Error::NonAffineElement { element: j });
            }
        }
        if signed_area(transported[el[0]], transported[el[1]], transported[el[2]]) <= 0.0 {
            return Err(Error::InvertedElement { element: j });
        }
        macro_id.push(m);
        element_maps.push(map);
    }

    let boundary0: Vec<bool> = (0..mesh0.num_nodes()).map(|i| mesh0.is_boundary(i)).collect();
    let mesh_t = TriMesh::with_macro_ids(
        transported,
        mesh0.elements().to_vec(),
        boundary0.clone(),
        macro_id.clone(),
    )?;
    let mesh0 = TriMesh::with_macro_ids(
        mesh0.nodes().to_vec(),
        mesh0.elements().to_vec(),
        boundary0,
        macro_id,
    )?;
    Ok(MatchedMeshPair {
        mesh0,
        mesh_t,
        element_maps,
        t,
    })
}

/// Finds the element containing `pt` within distance `tol` of the mesh and
/// returns its index with clamped, renormalized barycentric coordinates.
pub fn locate_point(mesh: &TriMesh, pt: Point2, tol: f64) -> Result<(usize, [f64; 3])> {
    // Fast path: strict containment among the point's bin candidates.
    for j in mesh.locator.candidates(pt, 0) {
        let tri = mesh.element_points(j);
        if let Some(bary) = barycentric(&tri, pt) {
            if bary.iter().all(|&l| l >= -1e-14) {
                return Ok((j, clamp_bary(bary)));
            }
        }
    }
    // Tolerant pass: nearest element by violation distance, widening to a
    // full scan only if the neighborhood misses.
    for full_scan in [false, true] {
        let best = if full_scan {
            best_by_violation(mesh, pt, 0..mesh.num_elements())
        } else {
            best_by_violation(mesh, pt, mesh.locator.candidates(pt, 1))
        };
        if let Some((j, bary, violation)) = best {
            if violation <= tol {
                return Ok((j, clamp_bary(bary)));
            }
        }
    }
    Err(Error::OutsideDomain {
        x: pt.x,
        y: pt.y,
        tol,
    })
}

/// Smallest distance-like violation over the given elements: each negative
/// barycentric coordinate is converted to a Euclidean distance via the
/// opposite altitude.
fn best_by_violation(
    mesh: &TriMesh,
    pt: Point2,
    candidates: impl Iterator<Item = usize>,
) -> Option<(usize, [f64; 3], f64)> {
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for j in candidates {
        let tri = mesh.element_points(j);
        let Some(bary) = barycentric(&tri, pt) else {
            continue;
        };
        let area = signed_area(tri[0], tri[1], tri[2]);
        let mut violation = 0.0_f64;
        for a in 0..3 {
            if bary[a] < 0.0 {
                let opposite = tri[(a + 1) % 3].distance(tri[(a + 2) % 3]);
                let altitude = 2.0 * area / opposite;
                violation = violation.max(-bary[a] * altitude);
            }
        }
        if best.as_ref().is_none_or(|&(_, _, v)| violation < v) {
            best = Some((j, bary, violation));
        }
    }
    best
}

fn clamp_bary(bary: [f64; 3]) -> [f64; 3] {
    let clamped = bary.map(|l| l.clamp(0.0, 1.0));
    let sum: f64 = clamped.iter().sum();
    clamped.map(|l| l / sum)
}
