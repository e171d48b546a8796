use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::{Point, Vector};
use crate::local::{SchemeKind, SpaceKind};
use crate::system::{BoundarySelector, Formulation};

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>;
/// `g[c][d] = ∂_d u_c`.
pub type GradientField = Arc<dyn Fn(&Point) -> [[f64; 2]; 2] + Send + Sync>;
/// Traction as a function of the point and the outward unit normal.
pub type TractionField = Arc<dyn Fn(&Point, &Vector) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub u: VectorField,
    pub grad: Option<GradientField>,
    /// Closed-form divergence; avoids forming `λ div u` from a cancelling trace.
    pub div: Option<ScalarField>,
}

#[derive(Clone)]
pub struct ModelProblem {
    pub name: String,
    pub lambda: f64,
    pub mu: f64,
    pub body_force: VectorField,
    pub exact: Option<ExactSolution>,
    /// g₁ on the traction part of the boundary.
    pub traction: Option<TractionField>,
    /// g₂ on the displacement part of the boundary.
    pub displacement: Option<VectorField>,
    pub formulation: Formulation,
    pub space: SpaceKind,
    pub scheme: SchemeKind,
    pub boundary: BoundarySelector,
}

impl fmt::Debug for ModelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelProblem")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .field("mu", &self.mu)
            .field("formulation", &self.formulation)
            .field("space", &self.space)
            .field("scheme", &self.scheme)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BuiltinExample {
    /// Pure traction with a λ-weighted compressible part.
    Example1,
    /// Divergence-free field; the load does not depend on λ.
    Example2DivFree,
    /// Example 2's field with displacement data on `y = 0` and traction
    /// elsewhere; `t_c` is the distortion of the quadrilateral mesh.
    Example3Mixed { t_c: f64 },
    /// `u = (a₀ + a₁x + a₂y, b₀ + b₁x + b₂y)` with zero load.
    Linear { a: [f64; 3], b: [f64; 3] },
}

impl BuiltinExample {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinExample::Example1 => "example1",
            BuiltinExample::Example2DivFree => "example2",
            BuiltinExample::Example3Mixed { .. } => "example3",
            BuiltinExample::Linear { .. } => "linear",
        }
    }

    /// Formulation used by the reference experiments.
    pub fn default_formulation(&self) -> Formulation {
        match self {
            BuiltinExample::Example1 | BuiltinExample::Example2DivFree => Formulation::PureTraction,
            BuiltinExample::Example3Mixed { .. } => Formulation::Mixed,
            BuiltinExample::Linear { .. } => Formulation::PureDisplacement,
        }
    }

    pub fn default_boundary(&self) -> BoundarySelector {
        match self {
            BuiltinExample::Example3Mixed { .. } => BoundarySelector::bottom(),
            _ => BoundarySelector::all(),
        }
    }
}

/// Closed forms of `u`, `∇u`, `div u` and `Δu`.
struct Field {
    u: Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>,
    grad: Arc<dyn Fn(&Point) -> [[f64; 2]; 2] + Send + Sync>,
    div: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    /// `∇ div u`.
    grad_div: Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>,
    laplacian: Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>,
}

fn example1_field(lambda: f64) -> Field {
    let s = 1.0 / (1.0 + lambda);
    let tp = 2.0 * PI;
    Field {
        u: Arc::new(move |p| {
            let w = (PI * p.x).sin() * (PI * p.y).sin();
            [
                (-1.0 + (tp * p.x).cos()) * (tp * p.y).sin() + s * w,
                -(-1.0 + (tp * p.y).cos()) * (tp * p.x).sin() + s * w,
            ]
        }),
        grad: Arc::new(move |p| {
            let (sx, cx) = (tp * p.x).sin_cos();
            let (sy, cy) = (tp * p.y).sin_cos();
            let wx = PI * (PI * p.x).cos() * (PI * p.y).sin();
            let wy = PI * (PI * p.x).sin() * (PI * p.y).cos();
            [
                [-tp * sx * sy + s * wx, tp * (-1.0 + cx) * cy + s * wy],
                [-tp * (-1.0 + cy) * cx + s * wx, tp * sy * sx + s * wy],
            ]
        }),
        div: Arc::new(move |p| s * PI * (PI * (p.x + p.y)).sin()),
        grad_div: Arc::new(move |p| {
            let g = s * PI * PI * (PI * (p.x + p.y)).cos();
            [g, g]
        }),
        laplacian: Arc::new(move |p| {
            let (sx, cx) = (tp * p.x).sin_cos();
            let (sy, cy) = (tp * p.y).sin_cos();
            let w = (PI * p.x).sin() * (PI * p.y).sin();
            let k = 4.0 * PI * PI;
            [
                k * sy * (1.0 - 2.0 * cx) - 2.0 * PI * PI * s * w,
                -k * sx * (1.0 - 2.0 * cy) - 2.0 * PI * PI * s * w,
            ]
        }),
    }
}

/// `u = (-2 sin³πx sin²πy cos πy, 2 sin²πx cos πx sin³πy)`, written as
/// `u₁ = -2 A(x) B(y)`, `u₂ = 2 C(x) D(y)`.
fn example2_field() -> Field {
    let parts = |p: &Point| {
        let (a, b) = (PI * p.x).sin_cos();
        let (c, d) = (PI * p.y).sin_cos();
        (a, b, c, d)
    };
    Field {
        u: Arc::new(move |p| {
            let (a, b, c, d) = parts(p);
            [-2.0 * a.powi(3) * c * c * d, 2.0 * a * a * b * c.powi(3)]
        }),
        grad: Arc::new(move |p| {
            let (a, b, c, d) = parts(p);
            let (aa, da) = (a.powi(3), 3.0 * PI * a * a * b);
            let (bb, db) = (c * c * d, PI * c * (2.0 * d * d - c * c));
            let (cc, dc) = (a * a * b, PI * (2.0 * a * b * b - a.powi(3)));
            let (dd, ddd) = (c.powi(3), 3.0 * PI * c * c * d);
            [
                [-2.0 * da * bb, -2.0 * aa * db],
                [2.0 * dc * dd, 2.0 * cc * ddd],
            ]
        }),
        div: Arc::new(|_| 0.0),
        grad_div: Arc::new(|_| [0.0, 0.0]),
        laplacian: Arc::new(move |p| {
            let (a, b, c, d) = parts(p);
            let pp = PI * PI;
            let aa = a.powi(3);
            let a2 = 3.0 * pp * a * (2.0 * b * b - a * a);
            let bb = c * c * d;
            let b2 = pp * (2.0 * d.powi(3) - 7.0 * c * c * d);
            let cc = a * a * b;
            let c2 = pp * (2.0 * b.powi(3) - 7.0 * a * a * b);
            let dd = c.powi(3);
            let d2 = 3.0 * pp * c * (2.0 * d * d - c * c);
            [-2.0 * (a2 * bb + aa * b2), 2.0 * (c2 * dd + cc * d2)]
        }),
    }
}

fn linear_field(a: [f64; 3], b: [f64; 3]) -> Field {
    Field {
        u: Arc::new(move |p| {
            [
                a[0] + a[1] * p.x + a[2] * p.y,
                b[0] + b[1] * p.x + b[2] * p.y,
            ]
        }),
        grad: Arc::new(move |_| [[a[1], a[2]], [b[1], b[2]]]),
        div: Arc::new(move |_| a[1] + b[2]),
        grad_div: Arc::new(|_| [0.0, 0.0]),
        laplacian: Arc::new(|_| [0.0, 0.0]),
    }
}

/// `σ(u) n` built from the closed-form gradient and divergence.
pub fn traction_from(grad: GradientField, div: ScalarField, lambda: f64, mu: f64) -> TractionField {
    Arc::new(move |p, n| {
        let g = grad(p);
        let dv = lambda * div(p);
        let s11 = 2.0 * mu * g[0][0] + dv;
        let s22 = 2.0 * mu * g[1][1] + dv;
        let s12 = mu * (g[0][1] + g[1][0]);
        [s11 * n.x + s12 * n.y, s12 * n.x + s22 * n.y]
    })
}

/// Builds a manufactured problem with `f = -μΔu - (μ + λ)∇ div u` and
/// boundary data taken from the exact solution. `formulation` and
/// `boundary` override the example defaults.
pub fn builtin_problem(
    example: BuiltinExample,
    lambda: f64,
    mu: f64,
    space: SpaceKind,
    scheme: SchemeKind,
    formulation: Option<Formulation>,
    boundary: Option<BoundarySelector>,
) -> Result<ModelProblem> {
    if !(mu > 0.0) || !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(VemError::InvalidArgument(format!(
            "Lamé constants must satisfy μ > 0, λ ≥ 0 (got λ = {lambda}, μ = {mu})"
        )));
    }
    let field = match example {
        BuiltinExample::Example1 => example1_field(lambda),
        BuiltinExample::Example2DivFree | BuiltinExample::Example3Mixed { .. } => example2_field(),
        BuiltinExample::Linear { a, b } => linear_field(a, b),
    };
    let Field {
        u,
        grad,
        div,
        grad_div,
        laplacian,
    } = field;
    let body_force: VectorField = Arc::new(move |p| {
        let l = laplacian(p);
        let g = grad_div(p);
        [
            -mu * l[0] - (mu + lambda) * g[0],
            -mu * l[1] - (mu + lambda) * g[1],
        ]
    });
    let traction = traction_from(grad.clone(), div.clone(), lambda, mu);
    Ok(ModelProblem {
        name: example.name().to_string(),
        lambda,
        mu,
        body_force,
        exact: Some(ExactSolution {
            u: u.clone(),
            grad: Some(grad),
            div: Some(div),
        }),
        traction: Some(traction),
        displacement: Some(u),
        formulation: formulation.unwrap_or_else(|| example.default_formulation()),
        space,
        scheme,
        boundary: boundary.unwrap_or_else(|| example.default_boundary()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(ex: BuiltinExample, lambda: f64) -> ModelProblem {
        builtin_problem(
            ex,
            lambda,
            1.0,
            SpaceKind::NCOriginal,
            SchemeKind::ReducedRot,
            None,
            None,
        )
        .unwrap()
    }

    /// `-div σ(u) = -μΔu - (μ + λ)∇ div u` by fourth-order central
    /// differences of the exact displacement.
    fn fd_body_force(pb: &ModelProblem, p: &Point) -> [f64; 2] {
        let u = pb.exact.as_ref().unwrap().u.clone();
        let (l, m) = (pb.lambda, pb.mu);
        let h = 1e-3;
        let at = |dx: f64, dy: f64| u(&Point::new(p.x + dx * h, p.y + dy * h));
        let second = |c: usize, ex: f64, ey: f64| {
            (-at(2.0 * ex, 2.0 * ey)[c] + 16.0 * at(ex, ey)[c] - 30.0 * at(0.0, 0.0)[c]
                + 16.0 * at(-ex, -ey)[c]
                - at(-2.0 * ex, -2.0 * ey)[c])
                / (12.0 * h * h)
        };
        let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
        let mixed = |c: usize| {
            let mut s = 0.0;
            for &(i, wi) in &w {
                for &(j, wj) in &w {
                    s += wi * wj * at(i, j)[c];
                }
            }
            s / (144.0 * h * h)
        };
        let lap = [
            second(0, 1.0, 0.0) + second(0, 0.0, 1.0),
            second(1, 1.0, 0.0) + second(1, 0.0, 1.0),
        ];
        let grad_div = [
            second(0, 1.0, 0.0) + mixed(1),
            mixed(0) + second(1, 0.0, 1.0),
        ];
        [
            -m * lap[0] - (m + l) * grad_div[0],
            -m * lap[1] - (m + l) * grad_div[1],
        ]
    }

    #[test]
    fn example1_value() {
        let pb = problem(BuiltinExample::Example1, 1.0);
        let u = (pb.exact.unwrap().u)(&Point::new(0.25, 0.25));
        assert!((u[0] + 0.75).abs() < 1e-14);
    }

    #[test]
    fn example2_is_divergence_free() {
        let pb = problem(BuiltinExample::Example2DivFree, 1.0);
        let g = pb.exact.unwrap().grad.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = Point::new(rng.random(), rng.random());
            let gp = g(&p);
            assert!((gp[0][0] + gp[1][1]).abs() < 1e-13);
        }
    }

    #[test]
    fn body_forces_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (ex, lambda) in [
            (BuiltinExample::Example1, 100.0),
            (BuiltinExample::Example1, 1.0),
            (BuiltinExample::Example2DivFree, 1.0),
        ] {
            let pb = problem(ex, lambda);
            let mut pts = vec![Point::new(0.3, 0.7)];
            pts.extend(
                (0..20).map(|_| {
                    Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95))
                }),
            );
            for p in pts {
                let f = (pb.body_force)(&p);
                let o = fd_body_force(&pb, &p);
                let scale = f[0].abs().max(f[1].abs()).max(1.0);
                for c in 0..2 {
                    assert!(
                        (f[c] - o[c]).abs() < 1e-6 * scale,
                        "{ex:?} at {p}: {f:?} vs {o:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for ex in [BuiltinExample::Example1, BuiltinExample::Example2DivFree] {
            let pb = problem(ex, 3.0);
            let e = pb.exact.unwrap();
            for _ in 0..20 {
                let p = Point::new(rng.random(), rng.random());
                let g = (e.grad.as_ref().unwrap())(&p);
                let h = 1e-6;
                for d in 0..2 {
                    let s = if d == 0 {
                        Vector::new(h, 0.0)
                    } else {
                        Vector::new(0.0, h)
                    };
                    let up = (e.u)(&(p + s));
                    let um = (e.u)(&(p - s));
                    for c in 0..2 {
                        assert!((g[c][d] - (up[c] - um[c]) / (2.0 * h)).abs() < 1e-7);
                    }
                }
                let div = (e.div.as_ref().unwrap())(&p);
                assert!((div - g[0][0] - g[1][1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(builtin_problem(
            BuiltinExample::Example1,
            1.0,
            0.0,
            SpaceKind::NCOriginal,
            SchemeKind::ReducedRot,
            None,
            None
        )
        .is_err());
    }
}
