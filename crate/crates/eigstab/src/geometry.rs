//! Polygonal domains, vertex perturbations and piecewise-affine macro maps.
//!
//! A domain is a simple counter-clockwise polygon described by its vertex
//! parameter vector `(x_1..x_k, y_1..y_k)`. Perturbing the vertices along a
//! direction vector yields a second polygon with the same combinatorics; the
//! pair is related by a global piecewise-affine map that is affine on each
//! triangle of a macro triangulation (a fan, for convex polygons).

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self { x: v.x, y: v.y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Signed area of the triangle `(a, b, c)`; positive when counter-clockwise.
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// A simple polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonSpec {
    vertices: Vec<Point2>,
}

impl PolygonSpec {
    /// Builds a polygon, checking simplicity and orientation.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DimensionMismatch(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for v in &vertices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::DimensionMismatch(
                    "polygon vertex coordinates must be finite".into(),
                ));
            }
        }
        let poly = Self { vertices };
        if let Some((i, j)) = poly.find_self_intersection() {
            return Err(Error::SelfIntersecting(format!(": edges {i} and {j} cross")));
        }
        if poly.area() <= 0.0 {
            return Err(Error::NotCounterClockwise);
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Signed area by the shoelace formula (positive for this type's invariant).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut sum = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            sum += a.x * b.y - b.x * a.y;
        }
        0.5 * sum
    }

    /// Bounding-box diagonal, the length scale for tolerances.
    pub fn diameter(&self) -> f64 {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            xmin = xmin.min(v.x);
            xmax = xmax.max(v.x);
            ymin = ymin.min(v.y);
            ymax = ymax.max(v.y);
        }
        (xmax - xmin).hypot(ymax - ymin)
    }

    /// Convexity test: every vertex turn is a (weakly) left turn.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let tol = 1e-12 * self.diameter() * self.diameter();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            signed_area(a, b, c) > -tol
        })
    }

    /// Returns indices of a pair of crossing edges, if any.
    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let tol = 1e-12 * self.diameter();
        for i in 0..n {
            for j in (i + 1)..n {
                // Edges sharing a vertex meet there by construction.
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d, tol) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2, tol: f64) -> bool {
    let d1 = signed_area(c, d, a);
    let d2 = signed_area(c, d, b);
    let d3 = signed_area(a, b, c);
    let d4 = signed_area(a, b, d);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
    {
        return true;
    }
    // Collinear overlap counts as an intersection.
    let on = |p: Point2, q: Point2, r: Point2| {
        signed_area(p, q, r).abs() <= tol
            && r.x >= p.x.min(q.x) - tol
            && r.x <= p.x.max(q.x) + tol
            && r.y >= p.y.min(q.y) - tol
            && r.y <= p.y.max(q.y) + tol
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

/// A vertex perturbation: direction `e` (layout `x_1..x_k, y_1..y_k`) and
/// magnitude `t`. Directions are used as given and never renormalized, so `t`
/// is directly the vertex displacement scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub direction: Vec<f64>,
    pub magnitude: f64,
}

impl PerturbationSpec {
    pub fn new(direction: Vec<f64>, magnitude: f64) -> Result<Self> {
        if magnitude < 0.0 || !magnitude.is_finite() {
            return Err(Error::DimensionMismatch(format!(
                "perturbation magnitude must be finite and >= 0, got {magnitude}"
            )));
        }
        if magnitude > 0.0 && direction.iter().all(|&e| e == 0.0) {
            return Err(Error::DimensionMismatch(
                "perturbation direction must have a nonzero entry when magnitude > 0".into(),
            ));
        }
        Ok(Self {
            direction,
            magnitude,
        })
    }
}

/// Moves every vertex `i` by `t * (e_x_i, e_y_i)` and re-validates the result.
pub fn perturb_polygon(p: &PolygonSpec, spec: &PerturbationSpec) -> Result<PolygonSpec> {
    let k = p.len();
    if spec.direction.len() != 2 * k {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} entries, expected 2k = {}",
            spec.direction.len(),
            2 * k
        )));
    }
    let t = spec.magnitude;
    let moved = p
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| Point2::new(v.x + t * spec.direction[i], v.y + t * spec.direction[k + i]))
        .collect();
    PolygonSpec::new(moved)
}

/// An invertible affine map `x -> L x + b` with cached inverse and |det L|.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap2 {
    linear: Matrix2<f64>,
    offset: Vector2<f64>,
    inverse_linear: Matrix2<f64>,
    det: f64,
}

impl AffineMap2 {
    pub fn new(linear: Matrix2<f64>, offset: Vector2<f64>) -> Result<Self> {
        let det = linear.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::DegenerateTriangle { area: det / 2.0 });
        }
        let inverse_linear = Matrix2::new(linear.m22, -linear.m12, -linear.m21, linear.m11) / det;
        Ok(Self {
            linear,
            offset,
            inverse_linear,
            det,
        })
    }

    pub fn identity() -> Self {
        Self {
            linear: Matrix2::identity(),
            offset: Vector2::zeros(),
            inverse_linear: Matrix2::identity(),
            det: 1.0,
        }
    }

    pub fn linear(&self) -> &Matrix2<f64> {
        &self.linear
    }

    pub fn offset(&self) -> &Vector2<f64> {
        &self.offset
    }

    pub fn inverse_linear(&self) -> &Matrix2<f64> {
        &self.inverse_linear
    }

    /// Signed determinant of the linear part.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::from_vector(self.linear * p.to_vector() + self.offset)
    }

    pub fn apply_inverse(&self, p: Point2) -> Point2 {
        Point2::from_vector(self.inverse_linear * (p.to_vector() - self.offset))
    }

    /// Max-norm distance between the linear parts of two maps.
    pub fn linear_distance(&self, other: &AffineMap2) -> f64 {
        (self.linear - other.linear).abs().max()
    }
}

/// Macro triangulation of a polygon: vertex-index triplets over the polygon's
/// vertices. The global perturbation map is affine on each macro triangle.
#[derive(Debug, Clone)]
pub struct MacroTriangulation {
    polygon: PolygonSpec,
    triangles: Vec<[usize; 3]>,
}

impl MacroTriangulation {
    pub fn polygon(&self) -> &PolygonSpec {
        &self.polygon
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_points(&self, m: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[m];
        let v = self.polygon.vertices();
        [v[a], v[b], v[c]]
    }

    /// Finds a macro triangle containing `pt` (normalized barycentric
    /// coordinates all >= -tol). First match in triangle order wins, so points
    /// on shared macro edges resolve deterministically.
    pub fn containing_triangle(&self, pt: Point2, tol: f64) -> Option<usize> {
        self.triangles.iter().enumerate().find_map(|(m, _)| {
            let tri = self.triangle_points(m);
            let bary = barycentric(&tri, pt)?;
            bary.iter().all(|&l| l >= -tol).then_some(m)
        })
    }
}

/// Normalized barycentric coordinates of `pt` in `tri`; `None` for degenerate
/// triangles.
pub fn barycentric(tri: &[Point2; 3], pt: Point2) -> Option<[f64; 3]> {
    let total = signed_area(tri[0], tri[1], tri[2]);
    if total == 0.0 {
        return None;
    }
    let l0 = signed_area(pt, tri[1], tri[2]) / total;
    let l1 = signed_area(tri[0], pt, tri[2]) / total;
    let l2 = signed_area(tri[0], tri[1], pt) / total;
    Some([l0, l1, l2])
}

/// Fan triangulation `(v0, vi, vi+1)` of a convex polygon.
pub fn fan_macro_triangulation(p: &PolygonSpec) -> Result<MacroTriangulation> {
    if !p.is_convex() {
        return Err(Error::NonConvex);
    }
    let k = p.len();
    let triangles: Vec<[usize; 3]> = (1..k - 1).map(|i| [0, i, i + 1]).collect();
    let macro_tri = MacroTriangulation {
        polygon: p.clone(),
        triangles,
    };
    // Exact tiling: fan areas must add up to the polygon area.
    let fan_area: f64 = macro_tri
        .triangles
        .iter()
        .enumerate()
        .map(|(m, _)| {
            let t = macro_tri.triangle_points(m);
            signed_area(t[0], t[1], t[2])
        })
        .sum();
    if (fan_area - p.area()).abs() > 1e-12 * p.area().abs() {
        return Err(Error::NonConvex);
    }
    Ok(macro_tri)
}

/// The affine map sending the triangle `src` onto `dst` vertex-for-vertex.
pub fn affine_from_triangles(src: &[Point2; 3], dst: &[Point2; 3]) -> Result<AffineMap2> {
    let diameter = src[0]
        .distance(src[1])
        .max(src[1].distance(src[2]))
        .max(src[2].distance(src[0]));
    let area = signed_area(src[0], src[1], src[2]);
    if area.abs() <= 1e-14 * diameter * diameter {
        return Err(Error::DegenerateTriangle { area });
    }
    let e1 = src[1].to_vector() - src[0].to_vector();
    let e2 = src[2].to_vector() - src[0].to_vector();
    let f1 = dst[1].to_vector() - dst[0].to_vector();
    let f2 = dst[2].to_vector() - dst[0].to_vector();
    let src_mat = Matrix2::from_columns(&[e1, e2]);
    let dst_mat = Matrix2::from_columns(&[f1, f2]);
    let det_src = src_mat.determinant();
    let src_inv = Matrix2::new(src_mat.m22, -src_mat.m12, -src_mat.m21, src_mat.m11) / det_src;
    let linear = dst_mat * src_inv;
    let offset = dst[0].to_vector() - linear * src[0].to_vector();
    let map = AffineMap2::new(linear, offset)?;
    let dst_diameter = dst[0]
        .distance(dst[1])
        .max(dst[1].distance(dst[2]))
        .max(dst[2].distance(dst[0]))
        .max(diameter);
    for (s, d) in src.iter().zip(dst.iter()) {
        if map.apply(*s).distance(*d) > 1e-12 * dst_diameter {
            return Err(Error::DegenerateTriangle { area });
        }
    }
    Ok(map)
}

/// One affine map per macro triangle, carrying the triangulation of `m0`'s
/// polygon onto the corresponding triangles of `p_t`. Shared macro edges get
/// identical endpoint images, so the induced global map is continuous.
pub fn macro_maps(m0: &MacroTriangulation, p_t: &PolygonSpec) -> Result<Vec<AffineMap2>> {
    if m0.polygon().len() != p_t.len() {
        return Err(Error::DimensionMismatch(format!(
            "vertex counts differ: {} vs {}",
            m0.polygon().len(),
            p_t.len()
        )));
    }
    m0.triangles()
        .iter()
        .map(|&[a, b, c]| {
            let src = m0.triangle_points_from_indices([a, b, c], m0.polygon());
            let dst = m0.triangle_points_from_indices([a, b, c], p_t);
            affine_from_triangles(&src, &dst)
        })
        .collect()
}

impl MacroTriangulation {
    fn triangle_points_from_indices(&self, idx: [usize; 3], poly: &PolygonSpec) -> [Point2; 3] {
        let v = poly.vertices();
        [v[idx[0]], v[idx[1]], v[idx[2]]]
    }
}

/// The unit square `(0,1)^2` as a polygon.
pub fn unit_square() -> PolygonSpec {
    PolygonSpec::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ])
    .expect("unit square is a valid polygon")
}

/// The triangle `(0,0), (1,0), apex`.
pub fn base_triangle(apex: Point2) -> Result<PolygonSpec> {
    PolygonSpec::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), apex])
}

/// Apex of the equilateral triangle on the unit base: `(1/2, sqrt(3)/2)`.
pub fn equilateral_apex() -> Point2 {
    Point2::new(0.5, 3.0_f64.sqrt() / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square_stretch(t: f64) -> PerturbationSpec {
        // Moves the two right-edge x coordinates (vertices 1 and 2).
        PerturbationSpec::new(vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], t).unwrap()
    }

    #[test]
    fn perturb_square_to_rectangle() {
        let eps = 1e-4;
        let p_t = perturb_polygon(&unit_square(), &square_stretch(eps)).unwrap();
        let v = p_t.vertices();
        assert_eq!(v[0], Point2::new(0.0, 0.0));
        assert_eq!(v[1], Point2::new(1.0 + eps, 0.0));
        assert_eq!(v[2], Point2::new(1.0 + eps, 1.0));
        assert_eq!(v[3], Point2::new(0.0, 1.0));
    }

    #[test]
    fn perturb_with_zero_magnitude_is_identity() {
        let p = unit_square();
        let p_t = perturb_polygon(&p, &square_stretch(0.0)).unwrap();
        assert_eq!(p, p_t);
    }

    #[test]
    fn perturb_equilateral_apex_right() {
        let p = base_triangle(equilateral_apex()).unwrap();
        let spec = PerturbationSpec::new(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 1e-6).unwrap();
        let p_t = perturb_polygon(&p, &spec).unwrap();
        assert_eq!(p_t.vertices()[2].x, 0.5 + 1e-6);
        assert_eq!(p_t.vertices()[2].y, equilateral_apex().y);
    }

    #[test]
    fn perturb_linear_in_t() {
        let p = unit_square();
        let (t1, t2) = (0.03, 0.04);
        let a = perturb_polygon(&p, &square_stretch(t1 + t2)).unwrap();
        let b = perturb_polygon(&perturb_polygon(&p, &square_stretch(t1)).unwrap(), &square_stretch(t2)).unwrap();
        for (va, vb) in a.vertices().iter().zip(b.vertices()) {
            assert_relative_eq!(va.x, vb.x, max_relative = 1e-15, epsilon = 1e-15);
            assert_relative_eq!(va.y, vb.y, max_relative = 1e-15, epsilon = 1e-15);
        }
    }

    #[test]
    fn perturb_rejects_self_intersection() {
        // Collapse the square's right edge past its left edge.
        let spec = PerturbationSpec::new(vec![0.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0).unwrap();
        let err = perturb_polygon(&unit_square(), &spec).unwrap_err();
        assert!(matches!(
            err,
            Error::SelfIntersecting(_) | Error::NotCounterClockwise
        ));
    }

    #[test]
    fn fan_counts() {
        let tri = base_triangle(Point2::new(0.3, 0.9)).unwrap();
        assert_eq!(fan_macro_triangulation(&tri).unwrap().triangles().len(), 1);

        let square = unit_square();
        let fan = fan_macro_triangulation(&square).unwrap();
        assert_eq!(fan.triangles(), &[[0, 1, 2], [0, 2, 3]]);

        let pentagon = PolygonSpec::new(
            (0..5)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / 5.0;
                    Point2::new(a.cos(), a.sin())
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(fan_macro_triangulation(&pentagon).unwrap().triangles().len(), 3);
    }

    #[test]
    fn fan_rejects_nonconvex() {
        let arrow = PolygonSpec::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(matches!(fan_macro_triangulation(&arrow), Err(Error::NonConvex)));
    }

    #[test]
    fn affine_identity_and_stretch() {
        let src = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let id = affine_from_triangles(&src, &src).unwrap();
        assert_relative_eq!(id.det(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(id.linear_distance(&AffineMap2::identity()), 0.0, epsilon = 1e-14);

        let t = 0.25;
        let dst = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0 + t, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let map = affine_from_triangles(&src, &dst).unwrap();
        assert_relative_eq!(map.linear()[(0, 0)], 1.0 + t, max_relative = 1e-14);
        assert_relative_eq!(map.linear()[(1, 1)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(map.linear()[(0, 1)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(map.det(), 1.0 + t, max_relative = 1e-14);
    }

    #[test]
    fn affine_random_pairs_apply_and_compare() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let random_tri = |rng: &mut ChaCha8Rng| loop {
            let tri = [
                Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            ];
            if signed_area(tri[0], tri[1], tri[2]).abs() > 0.1 {
                return tri;
            }
        };
        for _ in 0..200 {
            let src = random_tri(&mut rng);
            let dst = random_tri(&mut rng);
            let map = affine_from_triangles(&src, &dst).unwrap();
            for (s, d) in src.iter().zip(dst.iter()) {
                assert!(map.apply(*s).distance(*d) <= 1e-12 * 8.0);
            }
            // Round trip through the cached inverse.
            for s in &src {
                assert!(map.apply_inverse(map.apply(*s)).distance(*s) <= 1e-10 * 8.0);
            }
        }
    }

    #[test]
    fn affine_rejects_degenerate_source() {
        let src = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        let dst = src;
        assert!(matches!(
            affine_from_triangles(&src, &dst),
            Err(Error::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn macro_maps_rectangle_stretch_coincide() {
        let t = 0.1;
        let square = unit_square();
        let fan = fan_macro_triangulation(&square).unwrap();
        let p_t = perturb_polygon(&square, &square_stretch(t)).unwrap();
        let maps = macro_maps(&fan, &p_t).unwrap();
        assert_eq!(maps.len(), 2);
        for map in &maps {
            assert_relative_eq!(map.linear()[(0, 0)], 1.0 + t, max_relative = 1e-14);
            assert_relative_eq!(map.linear()[(1, 1)], 1.0, max_relative = 1e-14);
            assert_relative_eq!(map.linear()[(0, 1)], 0.0, epsilon = 1e-14);
            assert_relative_eq!(map.linear()[(1, 0)], 0.0, epsilon = 1e-14);
        }
        assert!(maps[0].linear_distance(&maps[1]) <= 1e-14);
    }

    #[test]
    fn macro_maps_zero_perturbation_identity() {
        let square = unit_square();
        let fan = fan_macro_triangulation(&square).unwrap();
        let maps = macro_maps(&fan, &square).unwrap();
        for map in &maps {
            assert!(map.linear_distance(&AffineMap2::identity()) <= 1e-14);
            assert!(map.offset().norm() <= 1e-14);
        }
    }

    #[test]
    fn macro_map_triangle_vertical_shift() {
        let eps = 1e-6;
        let p = base_triangle(equilateral_apex()).unwrap();
        let fan = fan_macro_triangulation(&p).unwrap();
        let spec = PerturbationSpec::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0], eps).unwrap();
        let p_t = perturb_polygon(&p, &spec).unwrap();
        let maps = macro_maps(&fan, &p_t).unwrap();
        assert_eq!(maps.len(), 1);
        let m = &maps[0];
        assert!(m.apply(Point2::new(0.0, 0.0)).distance(Point2::new(0.0, 0.0)) <= 1e-14);
        assert!(m.apply(Point2::new(1.0, 0.0)).distance(Point2::new(1.0, 0.0)) <= 1e-14);
        let apex = equilateral_apex();
        let moved = m.apply(apex);
        assert_relative_eq!(moved.y, apex.y + eps, max_relative = 1e-12);
        assert_relative_eq!(moved.x, apex.x, max_relative = 1e-12);
    }

    #[test]
    fn macro_maps_agree_on_shared_edges() {
        // Irregular convex quadrilateral, irregular perturbation.
        let p = PolygonSpec::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.2, -0.1),
            Point2::new(1.4, 1.1),
            Point2::new(-0.2, 0.9),
        ])
        .unwrap();
        let fan = fan_macro_triangulation(&p).unwrap();
        let spec = PerturbationSpec::new(vec![0.01, -0.02, 0.03, 0.0, 0.02, 0.01, -0.01, 0.02], 0.5).unwrap();
        let p_t = perturb_polygon(&p, &spec).unwrap();
        let maps = macro_maps(&fan, &p_t).unwrap();
        // Shared edge of the fan is (v0, v2); check its midpoint under both maps.
        let v = p.vertices();
        let mid = Point2::new(0.5 * (v[0].x + v[2].x), 0.5 * (v[0].y + v[2].y));
        let d = maps[0].apply(mid).distance(maps[1].apply(mid));
        assert!(d <= 1e-12 * p.diameter(), "shared-edge mismatch {d:e}");
    }
}
