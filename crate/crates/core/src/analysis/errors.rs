use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{ExactSolution, ModelProblem};
use crate::error::{Result, VemError};
use crate::geometry::{quadrature, Point};
use crate::local::{fine_element, SpaceKind};
use crate::mesh::MeshHierarchy;
use crate::system::{DofMap, Formulation, SolveResult};

/// `p = c₀ (1, 0) + c₁ (0, 1) + c₂ (-y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotionAdjustment {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Residuals of the constraints met by `u - p`.
    pub translation_residual: [f64; 2],
    pub rotation_residual: f64,
}

impl RigidMotionAdjustment {
    pub fn eval(&self, p: &Point) -> [f64; 2] {
        [self.c0 - self.c2 * p.y, self.c1 + self.c2 * p.x]
    }
}

/// Which integral of `u - p` is made to vanish with the rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanConstraint {
    Boundary,
    Domain,
}

/// Tensor Gauss rule on the unit square with `panels²` cells.
fn square_integral(panels: usize, f: &dyn Fn(&Point) -> [f64; 3]) -> [f64; 3] {
    let h = 1.0 / panels as f64;
    let mut acc = [0.0; 3];
    for j in 0..panels {
        for i in 0..panels {
            for &(tx, wx) in &quadrature::GAUSS3 {
                for &(ty, wy) in &quadrature::GAUSS3 {
                    let p = Point::new((i as f64 + tx) * h, (j as f64 + ty) * h);
                    let v = f(&p);
                    let w = wx * wy * h * h;
                    for c in 0..3 {
                        acc[c] += w * v[c];
                    }
                }
            }
        }
    }
    acc
}

/// Composite Gauss rule over the boundary of the unit square, counter-clockwise.
fn boundary_integral(panels: usize, f: &dyn Fn(&Point, &Point) -> [f64; 3]) -> [f64; 3] {
    let corners = [
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ];
    let mut acc = [0.0; 3];
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        let t = (b - a).normalize();
        let tp = Point::new(t.x, t.y);
        for k in 0..panels {
            let pa = a + (b - a) * (k as f64 / panels as f64);
            let pb = a + (b - a) * ((k + 1) as f64 / panels as f64);
            quadrature::segment_gauss3(&pa, &pb, &mut |q, w| {
                let v = f(&q, &tp);
                for c in 0..3 {
                    acc[c] += w * v[c];
                }
            });
        }
    }
    acc
}

fn coefficients(
    u: &dyn Fn(&Point) -> [f64; 2],
    constraint: MeanConstraint,
    panels: usize,
) -> [f64; 3] {
    // ∫_Ω rot u = ∮ u · t
    let rot = boundary_integral(panels, &|q, t| {
        let v = u(q);
        [v[0] * t.x + v[1] * t.y, 0.0, 0.0]
    })[0];
    let c2 = 0.5 * rot;
    let (m, measure) = match constraint {
        MeanConstraint::Boundary => (
            boundary_integral(panels, &|q, _| {
                let v = u(q);
                [v[0], v[1], 0.0]
            }),
            boundary_integral(panels, &|q, _| [q.x, q.y, 1.0]),
        ),
        MeanConstraint::Domain => (
            square_integral(panels, &|q| {
                let v = u(q);
                [v[0], v[1], 0.0]
            }),
            square_integral(panels, &|q| [q.x, q.y, 1.0]),
        ),
    };
    let c1 = (m[1] - c2 * measure[0]) / measure[2];
    let c0 = (m[0] + c2 * measure[1]) / measure[2];
    [c0, c1, c2]
}

/// Rigid motion removed from `u` so that `u - p` has zero boundary (or
/// domain) mean and zero mean rotation on the unit square.
pub fn rigid_motion_coefficients(
    exact: &ExactSolution,
    constraint: MeanConstraint,
) -> Result<RigidMotionAdjustment> {
    let u = &*exact.u;
    let c = coefficients(u, constraint, 16);
    let check = coefficients(u, constraint, 32);
    let diff = (0..3).map(|i| (c[i] - check[i]).abs()).fold(0.0, f64::max);
    if diff > 1e-8 {
        return Err(VemError::Quadrature(format!(
            "rigid-motion coefficients not converged: 16 vs 32 panels differ by {diff:e}"
        )));
    }
    let mut adj = RigidMotionAdjustment {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        translation_residual: [0.0; 2],
        rotation_residual: 0.0,
    };
    let shifted = |q: &Point| {
        let v = u(q);
        let p = adj.eval(q);
        [v[0] - p[0], v[1] - p[1]]
    };
    let rot = boundary_integral(32, &|q, t| {
        let v = shifted(q);
        [v[0] * t.x + v[1] * t.y, 0.0, 0.0]
    })[0];
    let mean = match constraint {
        MeanConstraint::Boundary => boundary_integral(32, &|q, _| {
            let v = shifted(q);
            [v[0], v[1], 0.0]
        }),
        MeanConstraint::Domain => square_integral(32, &|q| {
            let v = shifted(q);
            [v[0], v[1], 0.0]
        }),
    };
    adj.translation_residual = [mean[0], mean[1]];
    adj.rotation_residual = rot;
    Ok(adj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Largest fine-element diameter.
    pub h: f64,
    pub ndof: usize,
    pub err_l2: f64,
    /// `None` when no exact gradient is available.
    pub err_h1: Option<f64>,
    pub rigid_motion: Option<RigidMotionAdjustment>,
}

/// The exact solution the discrete one is compared with: `u - p` for pure
/// traction, `u` otherwise.
pub fn reference_solution(
    problem: &ModelProblem,
) -> Result<(ExactSolution, Option<RigidMotionAdjustment>)> {
    let exact = problem
        .exact
        .clone()
        .ok_or_else(|| VemError::InvalidArgument("problem has no exact solution".into()))?;
    if problem.formulation != Formulation::PureTraction {
        return Ok((exact, None));
    }
    let constraint = if problem.space == SpaceKind::NCEnhanced {
        MeanConstraint::Domain
    } else {
        MeanConstraint::Boundary
    };
    let adj = rigid_motion_coefficients(&exact, constraint)?;
    let u = exact.u.clone();
    let shifted = ExactSolution {
        u: Arc::new(move |q| {
            let v = u(q);
            let p = adj.eval(q);
            [v[0] - p[0], v[1] - p[1]]
        }),
        grad: exact.grad.clone().map(|g| {
            let g: Arc<dyn Fn(&Point) -> [[f64; 2]; 2] + Send + Sync> = Arc::new(move |q| {
                let mut m = g(q);
                m[0][1] += adj.c2;
                m[1][0] -= adj.c2;
                m
            });
            g
        }),
        div: exact.div.clone(),
    };
    Ok((shifted, Some(adj)))
}

/// Monomial coefficients of `Π₁ᴱ u_h` (two components) on every fine element.
pub fn projected_coefficients(
    hierarchy: &MeshHierarchy,
    dofmap: &DofMap,
    chi: &[f64],
) -> Result<Vec<(crate::local::ProjectionData, [[f64; 3]; 2])>> {
    (0..hierarchy.fine.num_elements())
        .into_par_iter()
        .map(|f| {
            let fe = fine_element(hierarchy, f, dofmap.space)?;
            let n = fe.num_sites();
            let mut coeff = [[0.0; 3]; 2];
            for (comp, c) in coeff.iter_mut().enumerate() {
                let local: Vec<f64> = (0..n)
                    .map(|i| chi[dofmap.global(comp, fe.sites[i])])
                    .collect();
                *c = fe.projection.project(&local);
            }
            Ok((fe.projection, coeff))
        })
        .collect()
}

pub fn compute_errors(
    hierarchy: &MeshHierarchy,
    dofmap: &DofMap,
    result: &SolveResult,
    problem: &ModelProblem,
) -> Result<ErrorReport> {
    let (reference, rigid_motion) = reference_solution(problem)?;
    let projected = projected_coefficients(hierarchy, dofmap, &result.chi)?;
    let per_element: Vec<(f64, f64)> = projected
        .par_iter()
        .enumerate()
        .map(|(f, (p, coeff))| {
            let geom = hierarchy.fine.element_geometry(f);
            let mut l2 = 0.0;
            let mut h1 = 0.0;
            geom.for_each_quadrature_point(|q, w| {
                let u = (reference.u)(&q);
                let g = reference.grad.as_ref().map(|g| g(&q));
                for comp in 0..2 {
                    let (val, grad) = p.eval(&coeff[comp], &q);
                    l2 += w * (u[comp] - val).powi(2);
                    if let Some(g) = g {
                        h1 += w * ((g[comp][0] - grad[0]).powi(2) + (g[comp][1] - grad[1]).powi(2));
                    }
                }
            });
            (l2, h1)
        })
        .collect();
    let l2: f64 = per_element.iter().map(|e| e.0).sum();
    let h1: f64 = per_element.iter().map(|e| e.1).sum();
    Ok(ErrorReport {
        h: hierarchy.fine.max_diameter(),
        ndof: dofmap.num_dofs(),
        err_l2: l2.sqrt(),
        err_h1: reference.grad.as_ref().map(|_| h1.sqrt()),
        rigid_motion,
    })
}

/// Least-squares slope of `log err` against `log h`.
pub fn fit_rate(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 2 {
        return Err(VemError::InvalidArgument(
            "rate fit needs at least two points".into(),
        ));
    }
    if let Some(&(h, e)) = series.iter().find(|&&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(VemError::InvalidArgument(format!(
            "rate fit needs positive data, got (h = {h:e}, err = {e:e})"
        )));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(VemError::InvalidArgument(
            "rate fit needs distinct mesh sizes".into(),
        ));
    }
    Ok(sxy / sxx)
}
