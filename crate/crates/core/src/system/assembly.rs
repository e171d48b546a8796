use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CsrMatrix, DofMap, Formulation};
use crate::analysis::ModelProblem;
use crate::error::{Result, VemError};
use crate::geometry::{quadrature, Point};
use crate::local::{
    local_functionals, local_load, local_stiffness_lambda, local_stiffness_mu, SchemeKind,
    SpaceKind,
};
use crate::mesh::MeshHierarchy;

/// `[[A, D], [Dᵀ, 0]]` with `D = [d₁ d₂ d₃]` present only for pure traction.
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    /// Stiffness after symmetric elimination of displacement dofs, whose
    /// rows and columns are replaced by `dirichlet_scale · I`.
    pub a: CsrMatrix,
    pub borders: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Prescribed values, `None` for free dofs.
    pub dirichlet: Vec<Option<f64>>,
    pub dirichlet_scale: f64,
    /// The same system with `p = λ div_h u` kept as an unknown; `None` for λ = 0.
    pub pressure: Option<PressureSplit>,
}

/// `[[2μA_μ, Bᵀ], [B, -W/λ]]` with `W = diag(|E|)` over the cells on which
/// the divergence is reduced. Eliminating `p` gives back [`BorderedSystem::a`];
/// keeping it avoids entries of size λ.
#[derive(Debug, Clone)]
pub struct PressureSplit {
    /// `2μA_μ` after elimination of displacement dofs.
    pub a_mu: CsrMatrix,
    /// One row per reduction cell, displacement columns removed.
    pub b: CsrMatrix,
    /// `-W/λ` diagonal.
    pub c: Vec<f64>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
}

impl BorderedSystem {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_borders(&self) -> usize {
        self.borders.len()
    }

    pub fn bordered_triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.num_dofs();
        let mut t: Vec<(usize, usize, f64)> = self.a.triplets().collect();
        for (k, d) in self.borders.iter().enumerate() {
            for (i, &v) in d.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, n + k, v));
                    t.push((n + k, i, v));
                }
            }
        }
        t
    }

    pub fn bordered_matrix(&self) -> CsrMatrix {
        let m = self.num_dofs() + self.num_borders();
        CsrMatrix::from_triplets(m, m, self.bordered_triplets())
    }

    pub fn bordered_rhs(&self) -> Vec<f64> {
        let mut b = self.rhs.clone();
        b.extend(std::iter::repeat_n(0.0, self.num_borders()));
        b
    }

    pub fn to_dense_bordered(&self) -> DMatrix<f64> {
        self.bordered_matrix().to_dense()
    }
}

/// Element block of one coarse element in global numbering.
struct Block {
    dofs: Vec<usize>,
    a: DMatrix<f64>,
    rhs: Vec<f64>,
    a_mu: DMatrix<f64>,
    /// Divergence functionals and measures of the reduction cells.
    div: Vec<(nalgebra::DVector<f64>, f64)>,
    /// Per-dof contributions to d₃ and, for the enhanced space, d₁/d₂.
    rot: Vec<f64>,
    mean: Vec<f64>,
}

fn coarse_block(
    hierarchy: &MeshHierarchy,
    k: usize,
    model: &ModelProblem,
    space: SpaceKind,
    scheme: SchemeKind,
    n_sites: usize,
) -> Result<Block> {
    let lf = local_functionals(hierarchy, k, space)?;
    let m = lf.num_sites();
    let a_mu = local_stiffness_mu(&lf) * (2.0 * model.mu);
    let a = &a_mu + local_stiffness_lambda(&lf, scheme) * model.lambda;
    let div = match scheme {
        SchemeKind::UnifiedReduced => vec![(lf.div_k.clone(), lf.area)],
        SchemeKind::ReducedRot => lf
            .children
            .iter()
            .enumerate()
            .map(|(c, child)| (lf.scatter(c, &child.div), child.geometry.area))
            .collect(),
    };
    let mut rhs = nalgebra::DVector::zeros(2 * m);
    let mut mean = nalgebra::DVector::zeros(2 * m);
    for (c, child) in lf.children.iter().enumerate() {
        rhs += lf.scatter(c, &local_load(&child.geometry, space, &*model.body_force));
        // ∫_E Π φ = |E| × (value at the centroid) = |E| × constant coefficient
        let n = child.num_sites();
        let p = &child.projection;
        let w = nalgebra::DVector::from_fn(2 * n, |i, _| p.area * p.pi_coeff[(0, i % n)]);
        mean += lf.scatter(c, &w);
    }
    let dofs = (0..2 * m)
        .map(|i| {
            if i < m {
                lf.sites[i]
            } else {
                n_sites + lf.sites[i - m]
            }
        })
        .collect();
    Ok(Block {
        dofs,
        a,
        rhs: rhs.as_slice().to_vec(),
        a_mu,
        div,
        rot: lf.rot_k.as_slice().to_vec(),
        mean: mean.as_slice().to_vec(),
    })
}

/// Dof values of a closed-form field: edge means by 3-point Gauss for the
/// nonconforming spaces, vertex values for the conforming one.
pub fn interpolate_exact(
    u: &dyn Fn(&Point) -> [f64; 2],
    dofmap: &DofMap,
    hierarchy: &MeshHierarchy,
) -> Vec<f64> {
    let fine = &hierarchy.fine;
    let n = dofmap.n_sites;
    let mut chi = vec![0.0; 2 * n];
    for s in 0..n {
        let v = if dofmap.space.is_conforming() {
            u(&fine.vertices()[s])
        } else {
            let [a, b] = fine.edges()[s].vertices;
            quadrature::segment_mean(&fine.vertices()[a], &fine.vertices()[b], u)
        };
        chi[s] = v[0];
        chi[n + s] = v[1];
    }
    chi
}

pub fn assemble(
    hierarchy: &MeshHierarchy,
    model: &ModelProblem,
    dofmap: &DofMap,
) -> Result<BorderedSystem> {
    let space = dofmap.space;
    let scheme = model.scheme;
    if space != model.space || dofmap.formulation != model.formulation {
        return Err(VemError::Internal(
            "dof map and model disagree on space or formulation".into(),
        ));
    }
    let n_sites = dofmap.n_sites;
    let n = dofmap.num_dofs();
    let blocks: Vec<Block> = (0..hierarchy.coarse.num_elements())
        .into_par_iter()
        .map(|k| coarse_block(hierarchy, k, model, space, scheme, n_sites))
        .collect::<Result<_>>()?;

    let mut triplets = Vec::with_capacity(blocks.iter().map(|b| b.dofs.len().pow(2)).sum());
    let mut mu_triplets = Vec::with_capacity(triplets.capacity());
    let mut b_triplets = Vec::new();
    let mut cell_measure = Vec::new();
    let mut rhs = vec![0.0; n];
    let mut d3 = vec![0.0; n];
    let mut enhanced_mean = vec![0.0; n];
    for b in &blocks {
        for (j, &gj) in b.dofs.iter().enumerate() {
            for (i, &gi) in b.dofs.iter().enumerate() {
                let v = b.a[(i, j)];
                if v != 0.0 {
                    triplets.push((gi, gj, v));
                }
                let v = b.a_mu[(i, j)];
                if v != 0.0 {
                    mu_triplets.push((gi, gj, v));
                }
            }
            rhs[gj] += b.rhs[j];
            d3[gj] += b.rot[j];
            enhanced_mean[gj] += b.mean[j];
        }
        for (d, measure) in &b.div {
            let row = cell_measure.len();
            for (i, &gi) in b.dofs.iter().enumerate() {
                if d[i] != 0.0 {
                    b_triplets.push((row, gi, d[i]));
                }
            }
            cell_measure.push(*measure);
        }
    }

    let fine = &hierarchy.fine;
    if !dofmap.neumann_edges.is_empty() {
        let g1 = model.traction.as_ref().ok_or_else(|| {
            VemError::InvalidArgument("traction data required on the traction boundary".into())
        })?;
        for &e in &dofmap.neumann_edges {
            let [a, b] = fine.edges()[e].vertices;
            let (pa, pb) = (fine.vertices()[a], fine.vertices()[b]);
            let normal = outward_normal(hierarchy, e, &pa, &pb);
            let mut g = [0.0; 2];
            quadrature::segment_gauss3(&pa, &pb, &mut |q, w| {
                let t = g1(&q, &normal);
                g[0] += w * t[0];
                g[1] += w * t[1];
            });
            for (site, w) in edge_sites(space, e, a, b) {
                rhs[site] += w * g[0];
                rhs[n_sites + site] += w * g[1];
            }
        }
    }

    let borders = if dofmap.formulation == Formulation::PureTraction {
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        if space == SpaceKind::NCEnhanced {
            d1[..n_sites].copy_from_slice(&enhanced_mean[..n_sites]);
            d2[n_sites..].copy_from_slice(&enhanced_mean[n_sites..]);
        } else {
            for e in fine.boundary_edges() {
                let [a, b] = fine.edges()[e].vertices;
                let len = fine.edge_length(e);
                for (site, w) in edge_sites(space, e, a, b) {
                    d1[site] += w * len;
                    d2[n_sites + site] += w * len;
                }
            }
        }
        vec![d1, d2, d3]
    } else {
        Vec::new()
    };

    // symmetric elimination of displacement dofs
    let mut dirichlet = vec![None; n];
    if !dofmap.dirichlet_edges.is_empty() {
        let g2 = model.displacement.as_ref().ok_or_else(|| {
            VemError::InvalidArgument(
                "displacement data required on the displacement boundary".into(),
            )
        })?;
        let values = interpolate_exact(&**g2, dofmap, hierarchy);
        for (i, d) in dirichlet.iter_mut().enumerate() {
            if dofmap.is_dirichlet(i) {
                *d = Some(values[i]);
            }
        }
    }
    let load = rhs.clone();
    let (a, rhs, diag_mean) = eliminate(
        CsrMatrix::from_triplets(n, n, triplets),
        &dirichlet,
        load.clone(),
    );
    let pressure = if model.lambda > 0.0 {
        let (a_mu, rhs_u, _) = eliminate(
            CsrMatrix::from_triplets(n, n, mu_triplets),
            &dirichlet,
            load,
        );
        let np = cell_measure.len();
        let mut rhs_p = vec![0.0; np];
        let mut kept = Vec::with_capacity(b_triplets.len());
        for (r, j, v) in b_triplets {
            match dirichlet[j] {
                Some(g) => rhs_p[r] -= v * g,
                None => kept.push((r, j, v)),
            }
        }
        Some(PressureSplit {
            a_mu,
            b: CsrMatrix::from_triplets(np, n, kept),
            c: cell_measure.iter().map(|w| -w / model.lambda).collect(),
            rhs_u,
            rhs_p,
        })
    } else {
        None
    };
    Ok(BorderedSystem {
        a,
        borders,
        rhs,
        dirichlet,
        dirichlet_scale: diag_mean,
        pressure,
    })
}

/// Symmetric elimination: prescribed rows and columns become `s · I` with
/// `s` the mean absolute diagonal, and their couplings move to the right-hand side.
fn eliminate(
    full: CsrMatrix,
    dirichlet: &[Option<f64>],
    mut rhs: Vec<f64>,
) -> (CsrMatrix, Vec<f64>, f64) {
    let n = full.nrows();
    let diag_mean = {
        let s: f64 = (0..n).map(|i| full.get(i, i).abs()).sum();
        if s > 0.0 {
            s / n as f64
        } else {
            1.0
        }
    };
    if dirichlet.iter().all(Option::is_none) {
        return (full, rhs, diag_mean);
    }
    let mut kept = Vec::with_capacity(full.nnz());
    for (i, j, v) in full.triplets() {
        match (dirichlet[i], dirichlet[j]) {
            (None, None) => kept.push((i, j, v)),
            (None, Some(g)) => rhs[i] -= v * g,
            _ => {}
        }
    }
    for (i, d) in dirichlet.iter().enumerate() {
        if let Some(g) = d {
            kept.push((i, i, diag_mean));
            rhs[i] = diag_mean * g;
        }
    }
    (CsrMatrix::from_triplets(n, n, kept), rhs, diag_mean)
}

/// Sites and weights of the trace mean on a fine edge.
fn edge_sites(space: SpaceKind, e: usize, a: usize, b: usize) -> Vec<(usize, f64)> {
    if space.is_conforming() {
        vec![(a, 0.5), (b, 0.5)]
    } else {
        vec![(e, 1.0)]
    }
}

fn outward_normal(
    hierarchy: &MeshHierarchy,
    e: usize,
    pa: &Point,
    pb: &Point,
) -> crate::geometry::Vector {
    let fine = &hierarchy.fine;
    let owner = fine.edges()[e].elements[0].expect("boundary edge has an element");
    let cycle = &fine.elements()[owner];
    let [a, _] = fine.edges()[e].vertices;
    let i = fine
        .element_edges(owner)
        .iter()
        .position(|&x| x == e)
        .expect("edge of its element");
    // local edge i runs from cycle[i] to cycle[i+1]
    let (s, t) = if cycle[i] == a { (pa, pb) } else { (pb, pa) };
    let d = (t - s).normalize();
    crate::geometry::Vector::new(d.y, -d.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{builtin_problem, BuiltinExample};
    use crate::mesh::{generate_structured_quads, generate_voronoi, refine, RefineType};
    use crate::system::{build_dof_map, BoundarySelector};

    #[test]
    fn traction_system_has_rigid_kernel_fixed_by_borders() {
        let h = refine(&generate_structured_quads(2).unwrap(), RefineType::Type1).unwrap();
        for space in SpaceKind::ALL {
            let pb = builtin_problem(
                BuiltinExample::Example1,
                10.0,
                1.0,
                space,
                SchemeKind::ReducedRot,
                None,
                None,
            )
            .unwrap();
            let dm = build_dof_map(
                &h,
                space,
                Formulation::PureTraction,
                &BoundarySelector::all(),
            )
            .unwrap();
            let sys = assemble(&h, &pb, &dm).unwrap();
            assert!(sys.a.asymmetry() <= 1e-13 * sys.a.max_abs());
            let rigid: [fn(&Point) -> [f64; 2]; 3] =
                [|_| [1.0, 0.0], |_| [0.0, 1.0], |p| [-p.y, p.x]];
            let mut gram = nalgebra::Matrix3::zeros();
            for (c, r) in rigid.iter().enumerate() {
                let chi = interpolate_exact(r, &dm, &h);
                let res = sys.a.mul_vec(&chi);
                assert!(res.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-11 * sys.a.norm_inf());
                for (k, d) in sys.borders.iter().enumerate() {
                    gram[(k, c)] = d.iter().zip(&chi).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let sv = gram.singular_values();
            assert!(sv.min() > 1e-3 * sv.max(), "{space:?}: {gram}");
        }
    }

    #[test]
    fn constant_traction_on_one_edge() {
        let h = refine(&generate_structured_quads(1).unwrap(), RefineType::Type3).unwrap();
        let mut pb = builtin_problem(
            BuiltinExample::Linear {
                a: [0.0; 3],
                b: [0.0; 3],
            },
            1.0,
            1.0,
            SpaceKind::NCOriginal,
            SchemeKind::ReducedRot,
            Some(Formulation::Mixed),
            Some(BoundarySelector::bottom()),
        )
        .unwrap();
        pb.traction = Some(std::sync::Arc::new(|_, _| [1.0, 0.0]));
        let dm = build_dof_map(
            &h,
            SpaceKind::NCOriginal,
            Formulation::Mixed,
            &BoundarySelector::bottom(),
        )
        .unwrap();
        let sys = assemble(&h, &pb, &dm).unwrap();
        for &e in &dm.neumann_edges {
            assert!((sys.rhs[e] - h.fine.edge_length(e)).abs() < 1e-15);
            assert_eq!(sys.rhs[dm.n_sites + e], 0.0);
        }
    }

    #[test]
    fn rotation_interpolant_integrates_rot() {
        let h = refine(&generate_voronoi(20, 10, 4).unwrap(), RefineType::Type1).unwrap();
        for space in SpaceKind::ALL {
            let pb = builtin_problem(
                BuiltinExample::Example1,
                1.0,
                1.0,
                space,
                SchemeKind::ReducedRot,
                None,
                None,
            )
            .unwrap();
            let dm = build_dof_map(
                &h,
                space,
                Formulation::PureTraction,
                &BoundarySelector::all(),
            )
            .unwrap();
            let sys = assemble(&h, &pb, &dm).unwrap();
            let chi = interpolate_exact(&|p| [-p.y, p.x], &dm, &h);
            let r: f64 = sys.borders[2].iter().zip(&chi).map(|(a, b)| a * b).sum();
            assert!((r - 2.0).abs() < 1e-12);
            let ex2 = interpolate_exact(
                &*builtin_problem(
                    BuiltinExample::Example2DivFree,
                    1.0,
                    1.0,
                    space,
                    SchemeKind::ReducedRot,
                    None,
                    None,
                )
                .unwrap()
                .exact
                .unwrap()
                .u,
                &dm,
                &h,
            );
            // Σ_E div_E · χ over all fine elements
            let mut div = 0.0;
            for f in 0..h.fine.num_elements() {
                let fe = crate::local::fine_element(&h, f, space).unwrap();
                let ns = fe.num_sites();
                for i in 0..ns {
                    div += fe.div[i] * ex2[fe.sites[i]]
                        + fe.div[ns + i] * ex2[dm.n_sites + fe.sites[i]];
                }
            }
            assert!(div.abs() < 1e-10, "{space:?}: {div}");
        }
    }
}
