use nalgebra::{DMatrix, Matrix3};

use super::SpaceKind;
use crate::error::{Result, VemError};
use crate::geometry::{ElementGeometry, Point};

/// Elliptic projection of one scalar component onto the scaled monomials
/// `{1, (x - x_E)/h_E, (y - y_E)/h_E}`.
#[derive(Debug, Clone)]
pub struct ProjectionData {
    pub centroid: Point,
    pub h: f64,
    pub area: f64,
    /// `n_dof x 3`: dof values of the monomials.
    pub d: DMatrix<f64>,
    /// `3 x n_dof`.
    pub b: DMatrix<f64>,
    pub g: Matrix3<f64>,
    /// `3 x n_dof`: monomial coefficients of the projected basis functions.
    pub pi_coeff: DMatrix<f64>,
    /// `n_dof x n_dof`.
    pub pi_dof: DMatrix<f64>,
}

impl ProjectionData {
    pub fn num_dofs(&self) -> usize {
        self.d.nrows()
    }

    pub fn monomials(&self, p: &Point) -> [f64; 3] {
        [
            1.0,
            (p.x - self.centroid.x) / self.h,
            (p.y - self.centroid.y) / self.h,
        ]
    }

    /// Value and gradient of the linear function with monomial coefficients `c`.
    pub fn eval(&self, c: &[f64; 3], p: &Point) -> (f64, [f64; 2]) {
        let m = self.monomials(p);
        (
            c[0] * m[0] + c[1] * m[1] + c[2] * m[2],
            [c[1] / self.h, c[2] / self.h],
        )
    }

    /// Monomial coefficients of the projection of a scalar dof vector.
    pub fn project(&self, chi: &[f64]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (r, cr) in c.iter_mut().enumerate() {
            *cr = (0..chi.len()).map(|i| self.pi_coeff[(r, i)] * chi[i]).sum();
        }
        c
    }

    /// `∫_E ∇Π φ_i · ∇Π φ_j` for one scalar component.
    pub fn consistency(&self) -> DMatrix<f64> {
        let s = self.area / (self.h * self.h);
        let p1 = self.pi_coeff.row(1);
        let p2 = self.pi_coeff.row(2);
        (p1.transpose() * p1 + p2.transpose() * p2) * s
    }
}

/// Dof sites of an element: edge midpoints for the nonconforming spaces,
/// vertices for the conforming one.
pub fn dof_sites(geom: &ElementGeometry, space: SpaceKind) -> Vec<Point> {
    if space.is_conforming() {
        geom.vertices.clone()
    } else {
        geom.edges.iter().map(|e| e.midpoint).collect()
    }
}

/// Per-dof boundary weights `w_i` with `Σ_i w_i v_i = |∂E|⁻¹ ∫_∂E v` for
/// traces in the local space.
pub fn boundary_mean_weights(geom: &ElementGeometry, space: SpaceKind) -> Vec<f64> {
    let n = geom.num_vertices();
    let p = geom.perimeter;
    if space.is_conforming() {
        (0..n)
            .map(|i| 0.5 * (geom.edges[(i + n - 1) % n].length + geom.edges[i].length) / p)
            .collect()
    } else {
        geom.edges.iter().map(|e| e.length / p).collect()
    }
}

pub fn elliptic_projection(geom: &ElementGeometry, space: SpaceKind) -> Result<ProjectionData> {
    let n = geom.num_vertices();
    let h = geom.diameter;
    let xc = geom.centroid;
    let sites = dof_sites(geom, space);
    let mut d = DMatrix::zeros(n, 3);
    for (i, s) in sites.iter().enumerate() {
        d[(i, 0)] = 1.0;
        d[(i, 1)] = (s.x - xc.x) / h;
        d[(i, 2)] = (s.y - xc.y) / h;
    }
    let mut b = DMatrix::zeros(3, n);
    for (i, w) in boundary_mean_weights(geom, space).into_iter().enumerate() {
        b[(0, i)] = w;
    }
    for (i, e) in geom.edges.iter().enumerate() {
        let flux = e.normal * (e.length / h);
        if space.is_conforming() {
            // trapezoid rule on the linear trace, half to each endpoint
            for j in [i, (i + 1) % n] {
                b[(1, j)] += 0.5 * flux.x;
                b[(2, j)] += 0.5 * flux.y;
            }
        } else {
            b[(1, i)] = flux.x;
            b[(2, i)] = flux.y;
        }
    }
    let gd = &b * &d;
    let g = Matrix3::from_fn(|r, c| gd[(r, c)]);
    let ginv = g.try_inverse().ok_or_else(|| VemError::ProjectionFailure {
        element: usize::MAX,
        message: format!("singular G on element with area {:e}", geom.area),
    })?;
    let ginv = DMatrix::from_fn(3, 3, |r, c| ginv[(r, c)]);
    let pi_coeff = ginv * &b;
    let pi_dof = &d * &pi_coeff;
    Ok(ProjectionData {
        centroid: xc,
        h,
        area: geom.area,
        d,
        b,
        g,
        pi_coeff,
        pi_dof,
    })
}

/// `(I - Π)ᵀ(I - Π)` for both components, block diagonal in the
/// `[x-dofs | y-dofs]` ordering.
pub fn stab_matrix(p: &ProjectionData) -> DMatrix<f64> {
    let n = p.num_dofs();
    let r = DMatrix::identity(n, n) - &p.pi_dof;
    let s = r.transpose() * r;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&s);
    out.view_mut((n, n), (n, n)).copy_from(&s);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quadrature;

    fn pentagon() -> ElementGeometry {
        ElementGeometry::from_vertices(
            (0..5)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 5.0 + 0.3;
                    Point::new(0.2 + t.cos(), -0.1 + t.sin())
                })
                .collect(),
        )
    }

    fn irregular() -> ElementGeometry {
        ElementGeometry::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.2, 0.1),
            Point::new(1.4, 0.9),
            Point::new(0.5, 1.3),
            Point::new(-0.2, 0.6),
            Point::new(-0.1, 0.3),
        ])
    }

    const SPACES: [SpaceKind; 3] = [
        SpaceKind::NCOriginal,
        SpaceKind::NCEnhanced,
        SpaceKind::Conforming,
    ];

    #[test]
    fn reproduces_linears() {
        for g in [pentagon(), irregular()] {
            for s in SPACES {
                let p = elliptic_projection(&g, s).unwrap();
                let id = &p.pi_coeff * &p.d;
                assert!((id - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
                let ones = vec![1.0; p.num_dofs()];
                let c = p.project(&ones);
                assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stabilization_vanishes_on_linears_and_is_psd() {
        let g = irregular();
        for s in SPACES {
            let p = elliptic_projection(&g, s).unwrap();
            let st = stab_matrix(&p);
            let n = p.num_dofs();
            let sites = dof_sites(&g, s);
            let mut chi = nalgebra::DVector::zeros(2 * n);
            for (i, q) in sites.iter().enumerate() {
                chi[i] = 0.3 - 1.1 * q.x + 2.0 * q.y;
                chi[n + i] = -0.7 + 0.4 * q.x + 0.9 * q.y;
            }
            assert!((chi.transpose() * &st * &chi)[(0, 0)].abs() < 1e-12);
            assert!((&st - st.transpose()).amax() < 1e-14);
            let eig = st.symmetric_eigenvalues();
            assert!(eig.min() > -1e-13 * st.norm());
        }
    }

    #[test]
    fn stabilization_form_is_squared_norm_on_the_square() {
        let g = ElementGeometry::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]);
        let p = elliptic_projection(&g, SpaceKind::NCOriginal).unwrap();
        let mut e1 = nalgebra::DVector::zeros(4);
        e1[0] = 1.0;
        let r = &e1 - &p.pi_dof * &e1;
        let s = stab_matrix(&p).view((0, 0), (4, 4)).into_owned();
        // r is already in the kernel of Π, so its stabilization value is |r|²
        let v = (r.transpose() * &s * &r)[(0, 0)];
        assert!((v - r.norm_squared()).abs() < 1e-14);
    }

    /// Elliptic projection of a smooth non-polynomial scalar computed with
    /// unscaled monomials `{1, x, y}` and dense Gauss quadrature on the edges:
    /// `(∇Π v, ∇p) = ∫_∂E v ∂_n p` and `∫_∂E Π v = ∫_∂E v`.
    fn dense_oracle(g: &ElementGeometry, v: impl Fn(&Point) -> f64) -> [f64; 3] {
        let mut flux = [0.0; 2];
        let mut mean = 0.0;
        let mut mx = 0.0;
        let mut my = 0.0;
        for e in &g.edges {
            let panels = 64;
            for k in 0..panels {
                let a = e.start + (e.end - e.start) * (k as f64 / panels as f64);
                let b = e.start + (e.end - e.start) * ((k + 1) as f64 / panels as f64);
                quadrature::segment_gauss3(&a, &b, &mut |q, w| {
                    let val = v(&q);
                    flux[0] += w * val * e.normal.x;
                    flux[1] += w * val * e.normal.y;
                    mean += w * val;
                    mx += w * q.x;
                    my += w * q.y;
                });
            }
        }
        // gradient part: |E| ∇Π v = ∫_∂E v n
        let gx = flux[0] / g.area;
        let gy = flux[1] / g.area;
        let c0 = (mean - gx * mx - gy * my) / g.perimeter;
        [c0, gx, gy]
    }

    #[test]
    fn pentagon_matches_dense_quadrature_oracle() {
        let g = pentagon();
        let v = |p: &Point| (1.3 * p.x).sin() * (0.7 * p.y).exp() + p.x * p.y * p.y;
        let p = elliptic_projection(&g, SpaceKind::NCOriginal).unwrap();
        let chi: Vec<f64> = g
            .edges
            .iter()
            .map(|e| {
                let mut s = 0.0;
                let panels = 64;
                for k in 0..panels {
                    let a = e.start + (e.end - e.start) * (k as f64 / panels as f64);
                    let b = e.start + (e.end - e.start) * ((k + 1) as f64 / panels as f64);
                    quadrature::segment_gauss3(&a, &b, &mut |q, w| s += w * v(&q));
                }
                s / e.length
            })
            .collect();
        let c = p.project(&chi);
        let o = dense_oracle(&g, v);
        // convert scaled coefficients to {1, x, y}
        let gx = c[1] / p.h;
        let gy = c[2] / p.h;
        let c0 = c[0] - gx * p.centroid.x - gy * p.centroid.y;
        assert!((gx - o[1]).abs() < 1e-10, "{gx} vs {}", o[1]);
        assert!((gy - o[2]).abs() < 1e-10);
        assert!((c0 - o[0]).abs() < 1e-10);
    }

    #[test]
    fn boundary_weights_sum_to_one() {
        for s in SPACES {
            let w: f64 = boundary_mean_weights(&irregular(), s).iter().sum();
            assert!((w - 1.0).abs() < 1e-15);
        }
    }
}
