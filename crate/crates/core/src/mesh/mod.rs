//! Polygonal meshes: construction, generators, refinement hierarchies,
//! distortion, quality audit and file I/O.
//!
//! A [`PolygonalMesh`] owns its vertex coordinates and counter-clockwise
//! element cycles. Unique undirected edges are derived at construction and
//! identified by their vertex-index pair, never by coordinates.

mod generate;
mod io;
mod quality;
mod refine;
mod voronoi;

use std::collections::HashMap;

use crate::error::{Result, VemError};
use crate::geometry::{ElementGeometry, Point};

pub use generate::{distort, generate_structured_quads, generate_uniform_triangulation};
pub use io::{
    load_mesh, load_parents, read_mesh, read_parents, save_mesh, save_parents, write_mesh,
    write_parents,
};
pub use quality::{check_c0, ElementQuality, QualityReport};
pub use refine::{refine, MeshHierarchy, RefineType};
pub use voronoi::{generate_voronoi, voronoi_from_seeds};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// First element listed in traversal order; the second is `None` on the boundary.
    pub elements: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.elements[1].is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    elements: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    /// `element_edges[k][i]` is the edge between local vertices `i` and `i + 1`.
    element_edges: Vec<Vec<usize>>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl PolygonalMesh {
    /// Builds the edge table and checks orientation and conformity.
    pub fn new(vertices: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        let nv = vertices.len();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        let mut used = vec![false; nv];

        for (k, cycle) in elements.iter().enumerate() {
            if cycle.len() < 3 {
                return Err(VemError::Topology(format!(
                    "element {k} has {} vertices, need at least 3",
                    cycle.len()
                )));
            }
            for (i, &v) in cycle.iter().enumerate() {
                if v >= nv {
                    return Err(VemError::Topology(format!(
                        "element {k} references vertex {v}, only {nv} vertices"
                    )));
                }
                if cycle[..i].contains(&v) {
                    return Err(VemError::Topology(format!(
                        "element {k} repeats vertex {v}"
                    )));
                }
                used[v] = true;
            }
            let pts: Vec<Point> = cycle.iter().map(|&v| vertices[v]).collect();
            let area = crate::geometry::signed_area(&pts);
            if !(area > 0.0) {
                return Err(VemError::Topology(format!(
                    "element {k} is not counter-clockwise (signed area {area:e})"
                )));
            }
            let n = cycle.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let a = cycle[i];
                let b = cycle[(i + 1) % n];
                if let Some(prev) = directed.insert((a, b), k) {
                    return Err(VemError::Topology(format!(
                        "directed edge ({a}, {b}) used by elements {prev} and {k}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let id = match edge_index.get(&key) {
                    Some(&id) => {
                        let e: &mut Edge = &mut edges[id];
                        if e.elements[1].is_some() {
                            return Err(VemError::Topology(format!(
                                "edge ({}, {}) has more than two elements",
                                key.0, key.1
                            )));
                        }
                        e.elements[1] = Some(k);
                        id
                    }
                    None => {
                        let id = edges.len();
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            elements: [Some(k), None],
                        });
                        edge_index.insert(key, id);
                        id
                    }
                };
                local.push(id);
            }
            element_edges.push(local);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(VemError::Topology(format!(
                "vertex {v} belongs to no element"
            )));
        }
        // A conforming tiling of a simply connected domain has V - E + F = 1;
        // hanging vertices show up as a deficit here.
        let euler = nv as i64 - edges.len() as i64 + elements.len() as i64;
        if !elements.is_empty() && euler != 1 {
            return Err(VemError::Topology(format!(
                "Euler characteristic {euler} != 1 (non-conforming or multiply connected mesh)"
            )));
        }
        Ok(Self {
            vertices,
            elements,
            edges,
            element_edges,
            edge_lookup: edge_index,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element_edges(&self, k: usize) -> &[usize] {
        &self.element_edges[k]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn element_points(&self, k: usize) -> Vec<Point> {
        self.elements[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn element_geometry(&self, k: usize) -> ElementGeometry {
        ElementGeometry::from_vertices(self.element_points(k))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a] - self.vertices[b]).norm()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        nalgebra::center(&self.vertices[a], &self.vertices[b])
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary())
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in self.boundary_edges() {
            for v in self.edges[e].vertices {
                flags[v] = true;
            }
        }
        flags
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| crate::geometry::signed_area(&self.element_points(k)))
            .sum()
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| crate::geometry::diameter(&self.element_points(k)))
            .fold(0.0, f64::max)
    }

    pub fn is_all_triangles(&self) -> bool {
        self.elements.iter().all(|c| c.len() == 3)
    }

    /// Checks that the elements tile a domain of the given area.
    pub fn check_tiling(&self, domain_area: f64, rel_tol: f64) -> Result<()> {
        let total = self.total_area();
        if (total - domain_area).abs() > rel_tol * domain_area.abs() {
            return Err(VemError::Topology(format!(
                "element areas sum to {total:.17e}, expected {domain_area:.17e}"
            )));
        }
        Ok(())
    }

    /// Same connectivity, relocated vertices.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            ..self.clone()
        }
    }
}

/// Convenience wrapper matching the operation name used by callers.
pub fn element_geometry(mesh: &PolygonalMesh, k: usize) -> ElementGeometry {
    mesh.element_geometry(k)
}
