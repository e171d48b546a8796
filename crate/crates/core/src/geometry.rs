//! Planar polygon geometry and the quadrature rules used throughout the solver.

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

/// Shoelace signed area; positive for counter-clockwise cycles.
pub fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

/// Area centroid by the first-moment formula. Falls back to the vertex mean
/// for degenerate (zero-area) cycles.
pub fn polygon_centroid(pts: &[Point]) -> Point {
    let n = pts.len();
    // Shift to the first vertex to limit cancellation on small elements.
    let o = pts[0];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = pts[i] - o;
        let q = pts[(i + 1) % n] - o;
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        let mut s = Vector::zeros();
        for p in pts {
            s += p - o;
        }
        return o + s / n as f64;
    }
    o + Vector::new(cx / (3.0 * a2), cy / (3.0 * a2))
}

/// Largest pairwise vertex distance.
pub fn diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Twice the signed area of the triangle (a, b, c).
pub fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGeometry {
    pub start: Point,
    pub end: Point,
    pub length: f64,
    pub midpoint: Point,
    /// Outward unit normal.
    pub normal: Vector,
    /// Counter-clockwise unit tangent, `(-n2, n1)`.
    pub tangent: Vector,
}

impl EdgeGeometry {
    pub fn new(start: Point, end: Point) -> Self {
        let d = end - start;
        let length = d.norm();
        let tangent = d / length;
        let normal = Vector::new(tangent.y, -tangent.x);
        Self {
            start,
            end,
            length,
            midpoint: nalgebra::center(&start, &end),
            normal,
            tangent,
        }
    }
}

/// Per-element geometric data: local edge `i` runs from vertex `i` to vertex `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub vertices: Vec<Point>,
    pub centroid: Point,
    pub area: f64,
    pub diameter: f64,
    pub perimeter: f64,
    pub edges: Vec<EdgeGeometry>,
}

impl ElementGeometry {
    pub fn from_vertices(vertices: Vec<Point>) -> Self {
        let n = vertices.len();
        let edges: Vec<EdgeGeometry> = (0..n)
            .map(|i| EdgeGeometry::new(vertices[i], vertices[(i + 1) % n]))
            .collect();
        let perimeter = edges.iter().map(|e| e.length).sum();
        Self {
            centroid: polygon_centroid(&vertices),
            area: signed_area(&vertices),
            diameter: diameter(&vertices),
            perimeter,
            edges,
            vertices,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// `Σ_e |e| n_e`, zero for a closed polygon.
    pub fn normal_closure(&self) -> Vector {
        self.edges
            .iter()
            .fold(Vector::zeros(), |acc, e| acc + e.normal * e.length)
    }

    /// Visits the quadrature points of the centroid-fan triangulation with a
    /// degree-4 rule on every sub-triangle.
    pub fn for_each_quadrature_point(&self, mut visit: impl FnMut(Point, f64)) {
        let c = self.centroid;
        for e in &self.edges {
            quadrature::triangle_deg4(&c, &e.start, &e.end, &mut visit);
        }
    }
}

/// Uniform subdivisions per side of each fan triangle in [`integrate_vector`].
const LOAD_SUBDIVISIONS: usize = 4;

/// `∫_E f` for a vector field by the centroid-fan rule, each fan triangle
/// split into `LOAD_SUBDIVISIONS²` congruent pieces.
pub fn integrate_vector(geom: &ElementGeometry, f: &dyn Fn(&Point) -> [f64; 2]) -> [f64; 2] {
    let mut acc = [0.0; 2];
    let mut visit = |p: Point, w: f64| {
        let v = f(&p);
        acc[0] += w * v[0];
        acc[1] += w * v[1];
    };
    let m = LOAD_SUBDIVISIONS;
    let c = geom.centroid;
    for e in &geom.edges {
        let node = |i: usize, j: usize| {
            let (s, t) = (i as f64 / m as f64, j as f64 / m as f64);
            c + (e.start - c) * s + (e.end - c) * t
        };
        for i in 0..m {
            for j in 0..m - i {
                quadrature::triangle_deg4(
                    &node(i, j),
                    &node(i + 1, j),
                    &node(i, j + 1),
                    &mut visit,
                );
                if i + j + 1 < m {
                    quadrature::triangle_deg4(
                        &node(i + 1, j),
                        &node(i + 1, j + 1),
                        &node(i, j + 1),
                        &mut visit,
                    );
                }
            }
        }
    }
    acc
}

pub mod quadrature {
    use super::Point;

    /// Symmetric 6-point rule exact for polynomials of degree 4 on triangles
    /// (barycentric coordinates, weights normalised to sum to one).
    const TRI_DEG4: [(f64, f64, f64); 6] = {
        const A1: f64 = 0.445_948_490_915_964_886_32;
        const W1: f64 = 0.223_381_589_678_011_465_70;
        const A2: f64 = 0.091_576_213_509_770_743_46;
        const W2: f64 = 0.109_951_743_655_321_867_64;
        [
            (A1, A1, W1),
            (A1, 1.0 - 2.0 * A1, W1),
            (1.0 - 2.0 * A1, A1, W1),
            (A2, A2, W2),
            (A2, 1.0 - 2.0 * A2, W2),
            (1.0 - 2.0 * A2, A2, W2),
        ]
    };

    /// Gauss-Legendre nodes and weights on `[0, 1]`.
    pub const GAUSS3: [(f64, f64); 3] = [
        (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
    ];

    /// Visits the degree-4 points of triangle `(a, b, c)`; weights carry the
    /// signed triangle area.
    pub fn triangle_deg4(a: &Point, b: &Point, c: &Point, visit: &mut impl FnMut(Point, f64)) {
        let area = 0.5 * super::orient(a, b, c);
        for &(l1, l2, w) in &TRI_DEG4 {
            let l0 = 1.0 - l1 - l2;
            let p = Point::new(
                l0 * a.x + l1 * b.x + l2 * c.x,
                l0 * a.y + l1 * b.y + l2 * c.y,
            );
            visit(p, w * area);
        }
    }

    /// Visits three-point Gauss nodes on the segment `a -> b`; weights carry the length.
    pub fn segment_gauss3(a: &Point, b: &Point, visit: &mut impl FnMut(Point, f64)) {
        let len = (b - a).norm();
        for &(t, w) in &GAUSS3 {
            visit(a + (b - a) * t, w * len);
        }
    }

    /// Mean of a vector field over the segment `a -> b` by three-point Gauss.
    pub fn segment_mean(a: &Point, b: &Point, f: &dyn Fn(&Point) -> [f64; 2]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for &(t, w) in &GAUSS3 {
            let v = f(&(a + (b - a) * t));
            m[0] += w * v[0];
            m[1] += w * v[1];
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn unit_square_geometry() {
        let g = ElementGeometry::from_vertices(unit_square());
        assert!((g.centroid - Point::new(0.5, 0.5)).norm() < 1e-15);
        assert!((g.area - 1.0).abs() < 1e-15);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!(g.normal_closure().norm() < 1e-14);
        for e in &g.edges {
            assert!((e.tangent - Vector::new(-e.normal.y, e.normal.x)).norm() < 1e-15);
        }
        assert!((g.edges[0].normal - Vector::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn regular_hexagon_area_matches_shoelace_oracle() {
        let pts: Vec<Point> = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        // Six equilateral triangles of side 1.
        let oracle = 6.0 * 3f64.sqrt() / 4.0;
        let g = ElementGeometry::from_vertices(pts);
        assert!((g.area - 1.5 * 3f64.sqrt()).abs() < 1e-12);
        assert!((g.area - oracle).abs() < 1e-12);
        assert!(g.centroid.coords.norm() < 1e-15);
        assert!((g.diameter - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fan_rule_integrates_quartics_exactly() {
        let pts = vec![
            Point::new(0.1, 0.0),
            Point::new(1.3, 0.2),
            Point::new(1.0, 1.1),
            Point::new(0.2, 0.9),
            Point::new(-0.1, 0.5),
        ];
        let g = ElementGeometry::from_vertices(pts.clone());
        // ∫ x^4 over the polygon via Green: ∮ x^5/5 dy, exact by Gauss (degree 5).
        let mut green = 0.0;
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            quadrature::segment_gauss3(&a, &b, &mut |p, w| {
                green += w * p.x.powi(5) / 5.0 * (b.y - a.y) / (b - a).norm();
            });
        }
        let mut fan = 0.0;
        g.for_each_quadrature_point(|p, w| fan += w * p.x.powi(4));
        assert!((fan - green).abs() < 1e-13);
    }
}
