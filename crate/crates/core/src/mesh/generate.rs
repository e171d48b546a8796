use std::f64::consts::PI;

use super::PolygonalMesh;
use crate::error::{Result, VemError};
use crate::geometry::{signed_area, Point};

fn lattice(n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point::new(i as f64 * h, j as f64 * h));
        }
    }
    v
}

/// `2n²` right triangles on the unit square; every cell is split along its
/// lower-left to upper-right diagonal.
pub fn generate_uniform_triangulation(n: usize) -> Result<PolygonalMesh> {
    if n == 0 {
        return Err(VemError::InvalidArgument(
            "triangulation needs n >= 1".into(),
        ));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut elems = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elems.push(vec![b, c, a]);
            elems.push(vec![d, a, c]);
        }
    }
    PolygonalMesh::new(lattice(n), elems)
}

/// `n²` axis-aligned squares of side `1/n` on the unit square.
pub fn generate_structured_quads(n: usize) -> Result<PolygonalMesh> {
    if n == 0 {
        return Err(VemError::InvalidArgument("quad mesh needs n >= 1".into()));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut elems = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            elems.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::new(lattice(n), elems)
}

/// Maps every vertex `(ξ, η)` to `(ξ + t s, η + t s)` with
/// `s = sin 2πξ sin 2πη`; vertices on the unit-square boundary are fixed.
pub fn distort(mesh: &PolygonalMesh, t_c: f64) -> Result<PolygonalMesh> {
    let moved: Vec<Point> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let s = t_c * (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).sin();
            Point::new(p.x + s, p.y + s)
        })
        .collect();
    // sin(2π) is not exactly zero in floating point; keep boundary vertices put.
    let moved: Vec<Point> = moved
        .into_iter()
        .zip(mesh.vertices())
        .map(|(q, p)| {
            let on_side = |t: f64| t == 0.0 || t == 1.0;
            if on_side(p.x) || on_side(p.y) {
                *p
            } else {
                q
            }
        })
        .collect();
    let out = mesh.with_vertices(moved);
    for k in 0..out.num_elements() {
        let area = signed_area(&out.element_points(k));
        if !(area > 0.0) {
            return Err(VemError::DistortionFailure { element: k, area });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangulation_counts() {
        let m = generate_uniform_triangulation(1).unwrap();
        assert_eq!((m.num_elements(), m.num_vertices()), (2, 4));
        let m = generate_uniform_triangulation(5).unwrap();
        assert_eq!(m.num_elements(), 50);
        for k in 0..m.num_elements() {
            let g = m.element_geometry(k);
            assert!((g.diameter - 2f64.sqrt() / 5.0).abs() < 1e-15);
        }
        let m = generate_uniform_triangulation(2).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        assert!(matches!(
            generate_uniform_triangulation(0),
            Err(VemError::InvalidArgument(_))
        ));
    }

    #[test]
    fn quad_counts() {
        let m = generate_structured_quads(1).unwrap();
        assert_eq!((m.num_elements(), m.num_vertices()), (1, 4));
        let m = generate_structured_quads(5).unwrap();
        assert_eq!((m.num_elements(), m.num_vertices()), (25, 36));
        let m = generate_structured_quads(3).unwrap();
        for k in 0..m.num_elements() {
            assert!((m.element_geometry(k).area - 1.0 / 9.0).abs() < 1e-14);
        }
        assert!(generate_structured_quads(0).is_err());
    }

    #[test]
    fn distortion_map() {
        let m = generate_structured_quads(4).unwrap();
        let same = distort(&m, 0.0).unwrap();
        assert_eq!(same.vertices(), m.vertices());
        let d = distort(&m, 0.1).unwrap();
        // vertex (0.25, 0.25) is lattice index 6 (row 1, column 1)
        assert!((d.vertices()[6] - Point::new(0.35, 0.35)).norm() < 1e-15);
        for (p, q) in m.vertices().iter().zip(d.vertices()) {
            if p.x == 0.0 || p.y == 0.0 || p.x == 1.0 || p.y == 1.0 {
                assert_eq!(p, q);
            }
        }
        assert_eq!(d.elements(), m.elements());
        assert!((d.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_distortion_inverts() {
        let m = generate_structured_quads(8).unwrap();
        assert!(matches!(
            distort(&m, 0.6),
            Err(VemError::DistortionFailure { .. })
        ));
    }
}
