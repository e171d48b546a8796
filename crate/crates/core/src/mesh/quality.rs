//! Audit against the star-shapedness / vertex-separation mesh condition.

use super::PolygonalMesh;
use crate::geometry::{orient, ElementGeometry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementQuality {
    /// Radius of the largest disc about the centroid inside the star kernel, over `h_K`.
    pub star_ratio: f64,
    /// Smallest vertex-vertex distance over `h_K`.
    pub vertex_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub per_element: Vec<ElementQuality>,
    pub min_star_ratio: f64,
    pub min_vertex_ratio: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub pass: bool,
}

/// Lower bound on the star radius: the kernel is the intersection of the
/// inner half-planes of all edges, so the disc about the centroid is bounded
/// by the nearest supporting line.
fn element_quality(g: &ElementGeometry) -> ElementQuality {
    let c = g.centroid;
    let mut rho = f64::INFINITY;
    for e in &g.edges {
        // signed distance to the edge line, positive inside
        let d = -(c - e.start).dot(&e.normal);
        rho = rho.min(d);
    }
    let n = g.vertices.len();
    let in_kernel = (0..n).all(|i| orient(&c, &g.vertices[i], &g.vertices[(i + 1) % n]) > 0.0);
    if !in_kernel {
        rho = 0.0;
    }
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            dmin = dmin.min((g.vertices[i] - g.vertices[j]).norm());
        }
    }
    ElementQuality {
        star_ratio: rho.max(0.0) / g.diameter,
        vertex_ratio: dmin / g.diameter,
    }
}

pub fn check_c0(mesh: &PolygonalMesh, gamma1: f64, gamma2: f64) -> QualityReport {
    let per_element: Vec<ElementQuality> = (0..mesh.num_elements())
        .map(|k| element_quality(&mesh.element_geometry(k)))
        .collect();
    let min_star_ratio = per_element
        .iter()
        .map(|q| q.star_ratio)
        .fold(f64::INFINITY, f64::min);
    let min_vertex_ratio = per_element
        .iter()
        .map(|q| q.vertex_ratio)
        .fold(f64::INFINITY, f64::min);
    QualityReport {
        pass: min_star_ratio > gamma1 && min_vertex_ratio > gamma2,
        per_element,
        min_star_ratio,
        min_vertex_ratio,
        gamma1,
        gamma2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mesh::generate_uniform_triangulation;

    #[test]
    fn unit_square_passes() {
        let m = PolygonalMesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap();
        let r = check_c0(&m, 0.1, 0.1);
        assert!(r.pass);
        assert!((r.min_star_ratio - 0.5 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sliver_fails_vertex_separation() {
        let m = PolygonalMesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1e-6),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let r = check_c0(&m, 0.0, 0.1);
        assert!(!r.pass);
        assert!(r.min_vertex_ratio < 1e-5);
    }

    #[test]
    fn uniform_triangulation_vertex_ratio_matches_pairwise_oracle() {
        let m = generate_uniform_triangulation(5).unwrap();
        // exhaustive pairwise oracle over every element
        let mut oracle = f64::INFINITY;
        for k in 0..m.num_elements() {
            let p = m.element_points(k);
            let mut dmin = f64::INFINITY;
            let mut dmax: f64 = 0.0;
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if i != j {
                        let d = (p[i] - p[j]).norm();
                        dmin = dmin.min(d);
                        dmax = dmax.max(d);
                    }
                }
            }
            oracle = oracle.min(dmin / dmax);
        }
        let r = check_c0(&m, 0.05, 0.05);
        assert!((r.min_vertex_ratio - oracle).abs() < 1e-12);
        assert!((r.min_vertex_ratio - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(r.pass);
    }
}
