//! Global dof numbering, assembly of the (bordered) linear system and its solution.

mod assembly;
mod solve;
mod sparse;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::Point;
use crate::local::SpaceKind;
use crate::mesh::MeshHierarchy;

pub use assembly::{assemble, interpolate_exact, BorderedSystem, PressureSplit};
pub use solve::{solve, SolveResult};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    /// Traction on all of ∂Ω; rigid motions removed by three multipliers.
    PureTraction,
    /// Displacement prescribed on all of ∂Ω.
    PureDisplacement,
    /// Displacement on the edges picked by the boundary selector, traction elsewhere.
    Mixed,
}

/// Picks the Dirichlet part of the boundary from the endpoints of each boundary edge.
#[derive(Clone)]
pub struct BoundarySelector {
    name: String,
    pick: Arc<dyn Fn(&Point, &Point) -> bool + Send + Sync>,
}

impl fmt::Debug for BoundarySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BoundarySelector").field(&self.name).finish()
    }
}

impl BoundarySelector {
    pub fn from_fn(
        name: impl Into<String>,
        pick: impl Fn(&Point, &Point) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            pick: Arc::new(pick),
        }
    }

    pub fn all() -> Self {
        Self::from_fn("all", |_, _| true)
    }

    pub fn none() -> Self {
        Self::from_fn("none", |_, _| false)
    }

    /// The side `y = 0` of the unit square.
    pub fn bottom() -> Self {
        Self::from_fn("bottom", |a, b| a.y.abs() < 1e-12 && b.y.abs() < 1e-12)
    }

    /// Parses `all`, `none`, `bottom`, `top`, `left` or `right`.
    pub fn named(name: &str) -> Result<Self> {
        let side =
            |name: &str, f: fn(&Point) -> bool| Self::from_fn(name, move |a, b| f(a) && f(b));
        Ok(match name {
            "all" => Self::all(),
            "none" => Self::none(),
            "bottom" => Self::bottom(),
            "top" => side("top", |p| (p.y - 1.0).abs() < 1e-12),
            "left" => side("left", |p| p.x.abs() < 1e-12),
            "right" => side("right", |p| (p.x - 1.0).abs() < 1e-12),
            other => {
                return Err(VemError::InvalidArgument(format!(
                    "unknown boundary selector `{other}`"
                )))
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_dirichlet(&self, a: &Point, b: &Point) -> bool {
        (self.pick)(a, b)
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: SpaceKind,
    pub formulation: Formulation,
    /// Fine edges (nonconforming) or fine vertices (conforming).
    pub n_sites: usize,
    /// Global sites of every fine element, in local dof order.
    pub element_sites: Vec<Vec<usize>>,
    pub dirichlet_sites: Vec<bool>,
    /// Fine boundary edges carrying displacement data.
    pub dirichlet_edges: Vec<usize>,
    /// Fine boundary edges carrying traction data.
    pub neumann_edges: Vec<usize>,
}

impl DofMap {
    pub fn num_dofs(&self) -> usize {
        2 * self.n_sites
    }

    pub fn global(&self, comp: usize, site: usize) -> usize {
        comp * self.n_sites + site
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet_sites[dof % self.n_sites]
    }

    pub fn num_dirichlet_dofs(&self) -> usize {
        2 * self.dirichlet_sites.iter().filter(|&&d| d).count()
    }

    pub fn num_borders(&self) -> usize {
        if self.formulation == Formulation::PureTraction {
            3
        } else {
            0
        }
    }
}

pub fn build_dof_map(
    hierarchy: &MeshHierarchy,
    space: SpaceKind,
    formulation: Formulation,
    boundary: &BoundarySelector,
) -> Result<DofMap> {
    let fine = &hierarchy.fine;
    let n_sites = if space.is_conforming() {
        fine.num_vertices()
    } else {
        fine.num_edges()
    };
    let element_sites = (0..fine.num_elements())
        .map(|f| {
            if space.is_conforming() {
                fine.elements()[f].clone()
            } else {
                fine.element_edges(f).to_vec()
            }
        })
        .collect();
    let mut dirichlet_edges = Vec::new();
    let mut neumann_edges = Vec::new();
    for e in fine.boundary_edges() {
        let [a, b] = fine.edges()[e].vertices;
        let on_dirichlet = match formulation {
            Formulation::PureTraction => false,
            Formulation::PureDisplacement => true,
            Formulation::Mixed => boundary.is_dirichlet(&fine.vertices()[a], &fine.vertices()[b]),
        };
        if on_dirichlet {
            dirichlet_edges.push(e);
        } else {
            neumann_edges.push(e);
        }
    }
    if formulation == Formulation::Mixed && dirichlet_edges.is_empty() {
        return Err(VemError::InvalidArgument(format!(
            "mixed formulation with selector `{}` has no displacement edges; request PureTraction instead",
            boundary.name()
        )));
    }
    let mut dirichlet_sites = vec![false; n_sites];
    for &e in &dirichlet_edges {
        if space.is_conforming() {
            for v in fine.edges()[e].vertices {
                dirichlet_sites[v] = true;
            }
        } else {
            dirichlet_sites[e] = true;
        }
    }
    Ok(DofMap {
        space,
        formulation,
        n_sites,
        element_sites,
        dirichlet_sites,
        dirichlet_edges,
        neumann_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_quads, refine, RefineType};

    #[test]
    fn counts_on_refined_square() {
        let h = refine(&generate_structured_quads(1).unwrap(), RefineType::Type1).unwrap();
        let d = build_dof_map(
            &h,
            SpaceKind::NCOriginal,
            Formulation::PureDisplacement,
            &BoundarySelector::all(),
        )
        .unwrap();
        assert_eq!(d.n_sites, 12);
        assert_eq!(d.num_dofs(), 24);
        assert_eq!(d.dirichlet_sites.iter().filter(|&&x| x).count(), 8);
        let d = build_dof_map(
            &h,
            SpaceKind::Conforming,
            Formulation::PureDisplacement,
            &BoundarySelector::all(),
        )
        .unwrap();
        assert_eq!(d.n_sites, 9);
        assert_eq!(d.dirichlet_sites.iter().filter(|&&x| x).count(), 8);
        let d = build_dof_map(
            &h,
            SpaceKind::NCEnhanced,
            Formulation::PureTraction,
            &BoundarySelector::all(),
        )
        .unwrap();
        assert_eq!(d.num_dirichlet_dofs(), 0);
        assert_eq!(d.num_borders(), 3);
    }

    #[test]
    fn mixed_needs_dirichlet_edges() {
        let h = refine(&generate_structured_quads(2).unwrap(), RefineType::Type3).unwrap();
        assert!(matches!(
            build_dof_map(
                &h,
                SpaceKind::NCOriginal,
                Formulation::Mixed,
                &BoundarySelector::none()
            ),
            Err(VemError::InvalidArgument(_))
        ));
        let d = build_dof_map(
            &h,
            SpaceKind::NCOriginal,
            Formulation::Mixed,
            &BoundarySelector::bottom(),
        )
        .unwrap();
        assert_eq!(d.dirichlet_edges.len(), 4);
        assert_eq!(d.neumann_edges.len(), 12);
    }
}
