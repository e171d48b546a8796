//! Element-level virtual element operators.
//!
//! Every fine element carries one scalar dof per site (edge or vertex); a
//! vector dof vector is laid out as all x-components followed by all
//! y-components. Coarse-element quantities use the same layout over the
//! union of their children's sites, sorted by global site index.

mod element;
mod projection;

use serde::{Deserialize, Serialize};

pub use element::{
    eps_star_quadratic, fine_element, local_functionals, local_load, local_stiffness_lambda,
    local_stiffness_mu, FineElement, LocalFunctionals,
};
pub use projection::{
    boundary_mean_weights, dof_sites, elliptic_projection, stab_matrix, ProjectionData,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    NCOriginal,
    NCEnhanced,
    Conforming,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 3] = [
        SpaceKind::NCOriginal,
        SpaceKind::NCEnhanced,
        SpaceKind::Conforming,
    ];

    pub fn is_conforming(self) -> bool {
        self == SpaceKind::Conforming
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Rotation averaged over coarse elements, divergence over fine ones.
    ReducedRot,
    /// Rotation and divergence both averaged over coarse elements.
    UnifiedReduced,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 2] = [SchemeKind::ReducedRot, SchemeKind::UnifiedReduced];
}
