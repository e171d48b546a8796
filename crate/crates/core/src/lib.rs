//! Lowest-order virtual element solver for planar linear elasticity on
//! polygonal meshes, robust in the nearly incompressible limit.
//!
//! Layers, bottom up: [`mesh`] (meshes and refinement hierarchies),
//! [`local`] (element projections and matrices), [`system`] (global
//! assembly and solve) and [`analysis`] (manufactured solutions, errors,
//! convergence studies).

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod local;
pub mod mesh;
pub mod system;

pub use error::{Result, VemError};
