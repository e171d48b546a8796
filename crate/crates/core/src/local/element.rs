use nalgebra::{DMatrix, DVector};

use super::projection::{boundary_mean_weights, elliptic_projection, stab_matrix, ProjectionData};
use super::{SchemeKind, SpaceKind};
use crate::error::{Result, VemError};
use crate::geometry::{EdgeGeometry, ElementGeometry, Point, Vector};
use crate::mesh::MeshHierarchy;

/// One fine element with its projection and boundary functionals.
#[derive(Debug, Clone)]
pub struct FineElement {
    pub index: usize,
    pub geometry: ElementGeometry,
    /// Global scalar site of every local dof.
    pub sites: Vec<usize>,
    pub projection: ProjectionData,
    /// `div · χ = ∫_E div v`.
    pub div: DVector<f64>,
    /// `rot · χ = ∫_E rot v`.
    pub rot: DVector<f64>,
}

impl FineElement {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }
}

/// Edge-to-dof functional `χ ↦ Σ_e ∫_e v · a_e` for piecewise-constant
/// edge directions `a_e`, in the `[x | y]` layout.
fn edge_functional(
    geom: &ElementGeometry,
    space: SpaceKind,
    dir: impl Fn(&EdgeGeometry) -> Vector,
) -> DVector<f64> {
    let n = geom.num_vertices();
    let mut f = DVector::zeros(2 * n);
    for (i, e) in geom.edges.iter().enumerate() {
        let a = dir(e) * e.length;
        if space.is_conforming() {
            for j in [i, (i + 1) % n] {
                f[j] += 0.5 * a.x;
                f[n + j] += 0.5 * a.y;
            }
        } else {
            f[i] = a.x;
            f[n + i] = a.y;
        }
    }
    f
}

pub fn fine_element(hierarchy: &MeshHierarchy, f: usize, space: SpaceKind) -> Result<FineElement> {
    let geometry = hierarchy.fine.element_geometry(f);
    let sites = if space.is_conforming() {
        hierarchy.fine.elements()[f].clone()
    } else {
        hierarchy.fine.element_edges(f).to_vec()
    };
    let projection = elliptic_projection(&geometry, space).map_err(|e| match e {
        VemError::ProjectionFailure { message, .. } => VemError::ProjectionFailure {
            element: f,
            message,
        },
        other => other,
    })?;
    let div = edge_functional(&geometry, space, |e| e.normal);
    let rot = edge_functional(&geometry, space, |e| e.tangent);
    Ok(FineElement {
        index: f,
        geometry,
        sites,
        projection,
        div,
        rot,
    })
}

/// Children of one coarse element and their functionals gathered on the
/// coarse-local dof set.
#[derive(Debug, Clone)]
pub struct LocalFunctionals {
    pub element: usize,
    pub area: f64,
    pub space: SpaceKind,
    /// Sorted global scalar sites touched by the children.
    pub sites: Vec<usize>,
    pub children: Vec<FineElement>,
    /// `child_maps[c][i]`: coarse-local position of site `i` of child `c`.
    pub child_maps: Vec<Vec<usize>>,
    pub div_k: DVector<f64>,
    pub rot_k: DVector<f64>,
    /// Largest deviation of `rot_k` from the same functional built from
    /// `∂K` alone.
    pub cancellation_residual: f64,
}

impl LocalFunctionals {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Places a child vector in the coarse-local layout.
    pub fn scatter(&self, child: usize, v: &DVector<f64>) -> DVector<f64> {
        let m = self.num_sites();
        let n = self.children[child].num_sites();
        let map = &self.child_maps[child];
        let mut out = DVector::zeros(2 * m);
        for i in 0..n {
            out[map[i]] += v[i];
            out[m + map[i]] += v[n + i];
        }
        out
    }

    fn scatter_matrix(&self, child: usize, a: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let m = self.num_sites();
        let n = self.children[child].num_sites();
        let map = &self.child_maps[child];
        let pos = |i: usize| if i < n { map[i] } else { m + map[i - n] };
        for j in 0..2 * n {
            let pj = pos(j);
            for i in 0..2 * n {
                out[(pos(i), pj)] += a[(i, j)];
            }
        }
    }

    /// Restriction of a coarse-local vector to one child.
    pub fn gather(&self, child: usize, chi: &DVector<f64>) -> DVector<f64> {
        let m = self.num_sites();
        let map = &self.child_maps[child];
        let n = map.len();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                chi[map[i]]
            } else {
                chi[m + map[i - n]]
            }
        })
    }
}

pub fn local_functionals(
    hierarchy: &MeshHierarchy,
    k: usize,
    space: SpaceKind,
) -> Result<LocalFunctionals> {
    let children: Vec<FineElement> = hierarchy.children_of[k]
        .iter()
        .map(|&f| fine_element(hierarchy, f, space))
        .collect::<Result<_>>()?;
    let mut sites: Vec<usize> = children
        .iter()
        .flat_map(|c| c.sites.iter().copied())
        .collect();
    sites.sort_unstable();
    sites.dedup();
    let position = |s: usize| sites.binary_search(&s).expect("site collected above");
    let child_maps: Vec<Vec<usize>> = children
        .iter()
        .map(|c| c.sites.iter().map(|&s| position(s)).collect())
        .collect();
    let coarse_geom = hierarchy.coarse.element_geometry(k);
    let mut lf = LocalFunctionals {
        element: k,
        area: coarse_geom.area,
        space,
        div_k: DVector::zeros(2 * sites.len()),
        rot_k: DVector::zeros(2 * sites.len()),
        sites,
        children,
        child_maps,
        cancellation_residual: 0.0,
    };
    for c in 0..lf.children.len() {
        lf.div_k += lf.scatter(c, &lf.children[c].div);
        lf.rot_k += lf.scatter(c, &lf.children[c].rot);
    }

    // the same rotation functional assembled from ∂K only
    let m = lf.num_sites();
    let mut boundary = DVector::zeros(2 * m);
    let fine = &hierarchy.fine;
    for (i, &ce) in hierarchy.coarse.element_edges(k).iter().enumerate() {
        let t = coarse_geom.edges[i].tangent;
        for &fe in &hierarchy.coarse_edge_children[ce] {
            let a = t * fine.edge_length(fe);
            let mut add = |site: usize, w: f64| {
                let p = position_in(&lf.sites, site);
                boundary[p] += w * a.x;
                boundary[m + p] += w * a.y;
            };
            if space.is_conforming() {
                for v in fine.edges()[fe].vertices {
                    add(v, 0.5);
                }
            } else {
                add(fe, 1.0);
            }
        }
    }
    lf.cancellation_residual = (&lf.rot_k - boundary).amax();
    if lf.cancellation_residual > 1e-13 * coarse_geom.perimeter.max(1.0) {
        return Err(VemError::Internal(format!(
            "rotation functional of coarse element {k} does not telescope (residual {:e})",
            lf.cancellation_residual
        )));
    }
    Ok(lf)
}

fn position_in(sites: &[usize], s: usize) -> usize {
    sites
        .binary_search(&s)
        .expect("boundary site belongs to a child")
}

/// Matrix of `a_{μ,h}^K` on the coarse-local dof set.
pub fn local_stiffness_mu(lf: &LocalFunctionals) -> DMatrix<f64> {
    let m = lf.num_sites();
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for (c, child) in lf.children.iter().enumerate() {
        let n = child.num_sites();
        let cons = child.projection.consistency();
        let mut local = stab_matrix(&child.projection);
        let mut tl = local.view_mut((0, 0), (n, n));
        tl += &cons;
        let mut br = local.view_mut((n, n), (n, n));
        br += &cons;
        lf.scatter_matrix(c, &local, &mut a);
    }
    a -= (&lf.rot_k * lf.rot_k.transpose()) * (0.5 / lf.area);
    a
}

/// Matrix of the divergence term on the coarse-local dof set: per fine
/// element for [`SchemeKind::ReducedRot`], per coarse element for
/// [`SchemeKind::UnifiedReduced`].
pub fn local_stiffness_lambda(lf: &LocalFunctionals, scheme: SchemeKind) -> DMatrix<f64> {
    match scheme {
        SchemeKind::UnifiedReduced => (&lf.div_k * lf.div_k.transpose()) / lf.area,
        SchemeKind::ReducedRot => {
            let m = lf.num_sites();
            let mut a = DMatrix::zeros(2 * m, 2 * m);
            for (c, child) in lf.children.iter().enumerate() {
                let local = (&child.div * child.div.transpose()) / child.geometry.area;
                lf.scatter_matrix(c, &local, &mut a);
            }
            a
        }
    }
}

/// `‖∇_h Π v‖²_K - ½ (Π₀ rot v)² |K|` for a coarse-local dof vector.
pub fn eps_star_quadratic(lf: &LocalFunctionals, chi: &DVector<f64>) -> f64 {
    let mut grad = 0.0;
    for (c, child) in lf.children.iter().enumerate() {
        let local = lf.gather(c, chi);
        let n = child.num_sites();
        let p = &child.projection;
        for comp in 0..2 {
            let coeff = p.project(local.rows(comp * n, n).as_slice());
            let (_, g) = p.eval(&coeff, &p.centroid);
            grad += p.area * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    let rot = lf.rot_k.dot(chi);
    grad - 0.5 * rot * rot / lf.area
}

/// Load vector `(f, P_h v)_E`, where `P_h` is the boundary mean.
pub fn local_load(
    geom: &ElementGeometry,
    space: SpaceKind,
    f: &dyn Fn(&Point) -> [f64; 2],
) -> DVector<f64> {
    let fint = crate::geometry::integrate_vector(geom, f);
    let w = boundary_mean_weights(geom, space);
    let n = w.len();
    DVector::from_fn(2 * n, |i, _| {
        if i < n {
            w[i] * fint[0]
        } else {
            w[i - n] * fint[1]
        }
    })
}
