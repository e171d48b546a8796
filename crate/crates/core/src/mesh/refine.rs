//! Coarse/fine mesh pairs.
//!
//! Fine vertex numbering: coarse vertices keep their indices, the midpoint of
//! coarse edge `e` is vertex `nv + e`, and (Type1 only) the centroid of coarse
//! element `k` is vertex `nv + ne + k`.

use serde::{Deserialize, Serialize};

use super::PolygonalMesh;
use crate::error::{Result, VemError};
use crate::geometry::{orient, polygon_centroid, signed_area, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RefineType {
    /// Centroid joined to the edge midpoints: an n-gon becomes n quadrilaterals.
    Type1,
    /// Edge midpoints joined to each other: corner triangles plus the midpoint
    /// polygon (four congruent triangles for a triangle).
    Type2,
    /// Edge midpoints inserted as vertices; the region is unchanged.
    Type3,
}

impl RefineType {
    pub fn code(self) -> u8 {
        match self {
            RefineType::Type1 => 1,
            RefineType::Type2 => 2,
            RefineType::Type3 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(RefineType::Type1),
            2 => Some(RefineType::Type2),
            3 => Some(RefineType::Type3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub coarse: PolygonalMesh,
    pub fine: PolygonalMesh,
    pub parent_of: Vec<usize>,
    pub children_of: Vec<Vec<usize>>,
    pub refine_type: RefineType,
    /// Fine edges covering each coarse edge, ordered from its first to its
    /// second vertex (two halves after any of the built-in refinements).
    pub coarse_edge_children: Vec<Vec<usize>>,
}

impl MeshHierarchy {
    /// Reassembles a hierarchy from separately stored meshes and the parent map.
    pub fn from_parts(
        coarse: PolygonalMesh,
        fine: PolygonalMesh,
        parent_of: Vec<usize>,
        refine_type: RefineType,
    ) -> Result<Self> {
        if parent_of.len() != fine.num_elements() {
            return Err(VemError::Topology(format!(
                "parent map has {} entries for {} fine elements",
                parent_of.len(),
                fine.num_elements()
            )));
        }
        let nv = coarse.num_vertices();
        if fine.num_vertices() < nv
            || (0..nv).any(|v| (fine.vertices()[v] - coarse.vertices()[v]).norm() > 1e-12)
        {
            return Err(VemError::Topology(
                "fine mesh does not start with the coarse vertices".into(),
            ));
        }
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); fine.num_vertices()];
        for e in fine.edges() {
            adjacency[e.vertices[0]].push(e.vertices[1]);
            adjacency[e.vertices[1]].push(e.vertices[0]);
        }
        let mut coarse_edge_children = Vec::with_capacity(coarse.num_edges());
        for (ci, ce) in coarse.edges().iter().enumerate() {
            let [a, b] = ce.vertices;
            if let Some(direct) = fine.find_edge(a, b) {
                coarse_edge_children.push(vec![direct]);
                continue;
            }
            let mid = coarse.edge_midpoint(ci);
            let tol = 1e-10 * coarse.edge_length(ci);
            let m = adjacency[a]
                .iter()
                .copied()
                .find(|&w| (fine.vertices()[w] - mid).norm() <= tol && adjacency[b].contains(&w))
                .ok_or_else(|| {
                    VemError::Topology(format!("coarse edge {ci} is not split at its midpoint"))
                })?;
            let first = fine
                .find_edge(a, m)
                .expect("adjacent vertices share an edge");
            let second = fine
                .find_edge(m, b)
                .expect("adjacent vertices share an edge");
            coarse_edge_children.push(vec![first, second]);
        }
        let h = Self::assemble(coarse, fine, parent_of, refine_type, coarse_edge_children)?;
        h.check_conservation(1e-12)?;
        Ok(h)
    }

    fn assemble(
        coarse: PolygonalMesh,
        fine: PolygonalMesh,
        parent_of: Vec<usize>,
        refine_type: RefineType,
        coarse_edge_children: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut children_of = vec![Vec::new(); coarse.num_elements()];
        for (f, &p) in parent_of.iter().enumerate() {
            if p >= coarse.num_elements() {
                return Err(VemError::Topology(format!(
                    "fine element {f} has out-of-range parent {p}"
                )));
            }
            children_of[p].push(f);
        }
        if let Some(k) = children_of.iter().position(Vec::is_empty) {
            return Err(VemError::Topology(format!(
                "coarse element {k} has no children"
            )));
        }
        Ok(Self {
            coarse,
            fine,
            parent_of,
            children_of,
            refine_type,
            coarse_edge_children,
        })
    }

    /// Children of every parent tile it.
    pub fn check_conservation(&self, rel_tol: f64) -> Result<()> {
        for (k, kids) in self.children_of.iter().enumerate() {
            let parent = signed_area(&self.coarse.element_points(k));
            let sum: f64 = kids
                .iter()
                .map(|&f| signed_area(&self.fine.element_points(f)))
                .sum();
            if (sum - parent).abs() > rel_tol * parent {
                return Err(VemError::Internal(format!(
                    "children of element {k} cover {sum:e}, parent area {parent:e}"
                )));
            }
        }
        Ok(())
    }
}

pub fn refine(mesh: &PolygonalMesh, refine_type: RefineType) -> Result<MeshHierarchy> {
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let mut vertices: Vec<Point> = mesh.vertices().to_vec();
    vertices.extend((0..ne).map(|e| mesh.edge_midpoint(e)));
    if refine_type == RefineType::Type1 {
        vertices
            .extend((0..mesh.num_elements()).map(|k| polygon_centroid(&mesh.element_points(k))));
    }

    let mut elements = Vec::new();
    let mut parent_of = Vec::new();
    for (k, cycle) in mesh.elements().iter().enumerate() {
        let n = cycle.len();
        let mids: Vec<usize> = mesh.element_edges(k).iter().map(|&e| nv + e).collect();
        match refine_type {
            RefineType::Type1 => {
                let c = nv + ne + k;
                let pts = mesh.element_points(k);
                for i in 0..n {
                    if !(orient(&vertices[c], &pts[i], &pts[(i + 1) % n]) > 0.0) {
                        return Err(VemError::RefinementFailure(format!(
                            "centroid of element {k} is outside its star kernel"
                        )));
                    }
                }
                for i in 0..n {
                    elements.push(vec![cycle[i], mids[i], c, mids[(i + n - 1) % n]]);
                    parent_of.push(k);
                }
            }
            RefineType::Type2 => {
                for i in 0..n {
                    elements.push(vec![cycle[i], mids[i], mids[(i + n - 1) % n]]);
                    parent_of.push(k);
                }
                let inner_pts: Vec<Point> = mids.iter().map(|&m| vertices[m]).collect();
                if !(signed_area(&inner_pts) > 0.0)
                    || (0..n).any(|i| {
                        orient(
                            &inner_pts[i],
                            &inner_pts[(i + 1) % n],
                            &inner_pts[(i + 2) % n],
                        ) < 0.0
                    })
                {
                    return Err(VemError::RefinementFailure(format!(
                        "midpoint polygon of element {k} is not convex"
                    )));
                }
                elements.push(mids.clone());
                parent_of.push(k);
            }
            RefineType::Type3 => {
                let mut cyc = Vec::with_capacity(2 * n);
                for i in 0..n {
                    cyc.push(cycle[i]);
                    cyc.push(mids[i]);
                }
                elements.push(cyc);
                parent_of.push(k);
            }
        }
    }
    let fine = PolygonalMesh::new(vertices, elements)
        .map_err(|e| VemError::RefinementFailure(format!("refined mesh is invalid: {e}")))?;
    let coarse_edge_children = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let [a, b] = edge.vertices;
            vec![
                fine.find_edge(a, nv + e).expect("half edge exists"),
                fine.find_edge(nv + e, b).expect("half edge exists"),
            ]
        })
        .collect();
    let h = MeshHierarchy::assemble(
        mesh.clone(),
        fine,
        parent_of,
        refine_type,
        coarse_edge_children,
    )?;
    h.check_conservation(1e-12)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_quads, generate_uniform_triangulation};

    fn regular_polygon(n: usize) -> PolygonalMesh {
        let pts = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        PolygonalMesh::new(pts, vec![(0..n).collect()]).unwrap()
    }

    #[test]
    fn type1_on_square() {
        let h = refine(&generate_structured_quads(1).unwrap(), RefineType::Type1).unwrap();
        assert_eq!(h.fine.num_elements(), 4);
        assert_eq!(h.fine.num_vertices(), 9);
        assert!(h.parent_of.iter().all(|&p| p == 0));
        assert_eq!(h.fine.num_edges(), 12);
        assert!(h.fine.elements().iter().all(|c| c.len() == 4));
    }

    #[test]
    fn type2_on_triangle_gives_four_congruent() {
        let tri = PolygonalMesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.3, 0.8),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let h = refine(&tri, RefineType::Type2).unwrap();
        assert_eq!(h.fine.num_elements(), 4);
        assert_eq!(h.fine.num_vertices(), 6);
        for k in 0..4 {
            assert!((h.fine.element_geometry(k).area - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn type2_on_quads_adds_midpoint_polygon() {
        let h = refine(&generate_structured_quads(2).unwrap(), RefineType::Type2).unwrap();
        assert_eq!(h.fine.num_elements(), 4 * 5);
        assert_eq!(h.children_of[0].len(), 5);
    }

    #[test]
    fn type3_on_pentagon() {
        let h = refine(&regular_polygon(5), RefineType::Type3).unwrap();
        assert_eq!(h.fine.num_elements(), 1);
        assert_eq!(h.fine.element_edges(0).len(), 10);
        assert_eq!(h.fine.num_edges(), 10);
    }

    #[test]
    fn type1_rejects_centroid_outside_kernel() {
        // L-shaped thin hook whose centroid falls outside the kernel
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(3.0, 0.1),
            Point::new(0.1, 0.1),
            Point::new(0.1, 3.0),
            Point::new(0.0, 3.0),
        ];
        let m = PolygonalMesh::new(pts, vec![(0..6).collect()]).unwrap();
        assert!(matches!(
            refine(&m, RefineType::Type1),
            Err(VemError::RefinementFailure(_))
        ));
    }

    #[test]
    fn conservation_and_boundary_children() {
        let coarse = generate_uniform_triangulation(3).unwrap();
        for t in [RefineType::Type1, RefineType::Type2, RefineType::Type3] {
            let h = refine(&coarse, t).unwrap();
            h.check_conservation(1e-12).unwrap();
            assert!((h.fine.total_area() - 1.0).abs() < 1e-12);
            for e in coarse.boundary_edges() {
                let [a, b] = h.coarse_edge_children[e][..] else {
                    panic!("coarse edge {e} not halved")
                };
                assert!(h.fine.edges()[a].is_boundary() && h.fine.edges()[b].is_boundary());
            }
            let rebuilt =
                MeshHierarchy::from_parts(h.coarse.clone(), h.fine.clone(), h.parent_of.clone(), t)
                    .unwrap();
            assert_eq!(rebuilt.coarse_edge_children, h.coarse_edge_children);
        }
    }
}
