use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::errors::{compute_errors, fit_rate, ErrorReport};
use super::problem::{builtin_problem, BuiltinExample, ModelProblem};
use crate::error::{Result, VemError};
use crate::local::{SchemeKind, SpaceKind};
use crate::mesh::{
    distort, generate_structured_quads, generate_uniform_triangulation, generate_voronoi, refine,
    MeshHierarchy, PolygonalMesh, RefineType,
};
use crate::system::{
    assemble, build_dof_map, solve, BorderedSystem, BoundarySelector, DofMap, Formulation,
    SolveResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFamily {
    /// `n × n` squares, each cut along one diagonal.
    Tri,
    /// `n × n` squares, optionally distorted by `t_c`.
    Quad,
    /// `n` Lloyd-relaxed Voronoi cells.
    Voronoi,
}

impl MeshFamily {
    /// Nominal mesh size used as the abscissa of rate fits.
    pub fn nominal_h(self, n: usize) -> f64 {
        match self {
            MeshFamily::Tri | MeshFamily::Quad => 1.0 / n as f64,
            MeshFamily::Voronoi => 1.0 / (n as f64).sqrt(),
        }
    }
}

fn default_mu() -> f64 {
    1.0
}

fn default_lloyd() -> usize {
    100
}

/// Configuration of a convergence study, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// `example1`, `example2`, `example3` or `linear`.
    pub example: String,
    pub space: SpaceKind,
    pub scheme: SchemeKind,
    pub refine_type: RefineType,
    pub mesh: MeshFamily,
    /// `n` per level: subdivisions per side, or number of Voronoi cells.
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub formulation: Option<Formulation>,
    /// Name of the displacement part of ∂Ω for mixed problems.
    #[serde(default)]
    pub boundary: Option<String>,
    /// Quadrilateral distortion; also the parameter of `example3`.
    #[serde(default)]
    pub t_c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lloyd")]
    pub lloyd_iters: usize,
    /// Coefficients of the `linear` example.
    #[serde(default)]
    pub linear_a: Option<[f64; 3]>,
    #[serde(default)]
    pub linear_b: Option<[f64; 3]>,
    /// Where the CLI writes its outputs; defaults to the working directory.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl StudyConfig {
    pub fn builtin_example(&self) -> Result<BuiltinExample> {
        Ok(match self.example.as_str() {
            "example1" => BuiltinExample::Example1,
            "example2" => BuiltinExample::Example2DivFree,
            "example3" => BuiltinExample::Example3Mixed { t_c: self.t_c },
            "linear" => BuiltinExample::Linear {
                a: self.linear_a.unwrap_or([0.0, 1.0, 0.0]),
                b: self.linear_b.unwrap_or([0.0, 0.0, 1.0]),
            },
            other => {
                return Err(VemError::InvalidArgument(format!(
                    "unknown example `{other}` (expected example1, example2, example3 or linear)"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.builtin_example()?;
        if self.sizes.is_empty() || self.lambdas.is_empty() {
            return Err(VemError::InvalidArgument(
                "`sizes` and `lambdas` must be non-empty".into(),
            ));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VemError::InvalidArgument(format!(
                "`sizes` must be strictly ascending, got {:?}",
                self.sizes
            )));
        }
        if let Some(l) = self.lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(VemError::InvalidArgument(format!(
                "`lambdas` entries must be positive, got {l}"
            )));
        }
        if !(self.mu > 0.0) {
            return Err(VemError::InvalidArgument(format!(
                "`mu` must be positive, got {}",
                self.mu
            )));
        }
        if let Some(b) = &self.boundary {
            BoundarySelector::named(b)?;
        }
        Ok(())
    }

    pub fn problem(&self, lambda: f64) -> Result<ModelProblem> {
        let boundary = self
            .boundary
            .as_deref()
            .map(BoundarySelector::named)
            .transpose()?;
        builtin_problem(
            self.builtin_example()?,
            lambda,
            self.mu,
            self.space,
            self.scheme,
            self.formulation,
            boundary,
        )
    }

    pub fn coarse_mesh(&self, n: usize) -> Result<PolygonalMesh> {
        match self.mesh {
            MeshFamily::Tri => generate_uniform_triangulation(n),
            MeshFamily::Quad => {
                let m = generate_structured_quads(n)?;
                if self.t_c != 0.0 {
                    distort(&m, self.t_c)
                } else {
                    Ok(m)
                }
            }
            MeshFamily::Voronoi => generate_voronoi(n, self.lloyd_iters, self.seed),
        }
    }
}

/// Configuration of a single solve, read from JSON. Same keys as
/// [`StudyConfig`] with one size `n` and one `lambda`; `mesh_file`, when
/// set, replaces the generated coarse mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub example: String,
    pub space: SpaceKind,
    pub scheme: SchemeKind,
    pub refine_type: RefineType,
    pub mesh: MeshFamily,
    pub n: usize,
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub formulation: Option<Formulation>,
    #[serde(default)]
    pub boundary: Option<String>,
    #[serde(default)]
    pub t_c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lloyd")]
    pub lloyd_iters: usize,
    #[serde(default)]
    pub linear_a: Option<[f64; 3]>,
    #[serde(default)]
    pub linear_b: Option<[f64; 3]>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub mesh_file: Option<String>,
}

impl SolveConfig {
    /// The one-row study with the same settings.
    pub fn as_study(&self) -> StudyConfig {
        StudyConfig {
            example: self.example.clone(),
            space: self.space,
            scheme: self.scheme,
            refine_type: self.refine_type,
            mesh: self.mesh,
            sizes: vec![self.n],
            lambdas: vec![self.lambda],
            mu: self.mu,
            formulation: self.formulation,
            boundary: self.boundary.clone(),
            t_c: self.t_c,
            seed: self.seed,
            lloyd_iters: self.lloyd_iters,
            linear_a: self.linear_a,
            linear_b: self.linear_b,
            output_dir: self.output_dir.clone(),
        }
    }

    pub fn hierarchy(&self) -> Result<MeshHierarchy> {
        let coarse = match &self.mesh_file {
            Some(path) => crate::mesh::load_mesh(path)?,
            None => self.as_study().coarse_mesh(self.n)?,
        };
        refine(&coarse, self.refine_type)
    }
}

/// Everything produced by one discrete solve.
pub struct SolveOutcome {
    pub dofmap: DofMap,
    pub system: BorderedSystem,
    pub result: SolveResult,
    pub errors: Option<ErrorReport>,
    /// `max_k |d_k · χ| / (‖d_k‖ ‖χ‖)`, zero without borders.
    pub constraint_residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn solve_problem(hierarchy: &MeshHierarchy, problem: &ModelProblem) -> Result<SolveOutcome> {
    let dofmap = build_dof_map(
        hierarchy,
        problem.space,
        problem.formulation,
        &problem.boundary,
    )?;
    let system = assemble(hierarchy, problem, &dofmap)?;
    let result = solve(&system)?;
    let chi_norm = norm2(&result.chi);
    let constraint_residual = system
        .borders
        .iter()
        .map(|d| {
            let dot: f64 = d.iter().zip(&result.chi).map(|(a, b)| a * b).sum();
            let scale = norm2(d) * chi_norm;
            if scale > 0.0 {
                dot.abs() / scale
            } else {
                dot.abs()
            }
        })
        .fold(0.0, f64::max);
    let errors = match problem.exact {
        Some(_) => Some(compute_errors(hierarchy, &dofmap, &result, problem)?),
        None => None,
    };
    Ok(SolveOutcome {
        dofmap,
        system,
        result,
        errors,
        constraint_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub example: String,
    pub formulation: Formulation,
    pub space: SpaceKind,
    pub scheme: SchemeKind,
    pub refine_type: RefineType,
    pub lambda: f64,
    pub n: usize,
    /// Largest fine-element diameter.
    pub h: f64,
    pub h_nominal: f64,
    pub ndof: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    /// Rates against the previous row of the same λ; the CSV carries the
    /// series fit instead.
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    pub backward_error: f64,
    pub constraint_residual: f64,
    pub seconds: f64,
    /// Set when the row failed; the error fields are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub lambda: f64,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
    /// Least-squares rates over the whole series, one per λ.
    pub fits: Vec<SeriesFit>,
}

pub const CSV_HEADER: &str =
    "example,formulation,space,scheme,refine_type,lambda,n,h,ndof,errL2,errH1,rateL2,rateH1";

fn sig9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        "nan".to_string()
    }
}

fn opt9(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

impl ConvergenceTable {
    pub fn fit_for(&self, lambda: f64) -> Option<&SeriesFit> {
        self.fits.iter().find(|f| f.lambda == lambda)
    }

    /// Rows of one λ in mesh order.
    pub fn series(&self, lambda: f64) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.lambda == lambda)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let fit = self.fit_for(r.lambda);
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{},{},{},{},{},{},{},{},{}",
                r.example,
                r.formulation,
                r.space,
                r.scheme,
                r.refine_type.code(),
                sig9(r.lambda),
                r.n,
                sig9(r.h),
                r.ndof,
                sig9(r.err_l2),
                sig9(r.err_h1),
                opt9(fit.and_then(|f| f.rate_l2)),
                opt9(fit.and_then(|f| f.rate_h1)),
            );
        }
        s
    }

    pub fn rates_csv(&self) -> String {
        let mut s = String::from("lambda,rateL2,rateH1\n");
        for f in &self.fits {
            let _ = writeln!(
                s,
                "{},{},{}",
                sig9(f.lambda),
                opt9(f.rate_l2),
                opt9(f.rate_h1)
            );
        }
        s
    }

    /// Log-log plot of both error norms, one curve per λ.
    pub fn gnuplot_script(&self, csv_file: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set logscale xy");
        let _ = writeln!(s, "set key outside right");
        let _ = writeln!(s, "set xlabel 'h'");
        let _ = writeln!(s, "set ylabel 'error'");
        let _ = writeln!(s, "set terminal pngcairo size 900,600");
        let _ = writeln!(s, "set output '{}'", csv_file.replace(".csv", ".png"));
        let (h_lo, h_hi) = self
            .rows
            .iter()
            .filter(|r| r.h.is_finite())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                (lo.min(r.h), hi.max(r.h))
            });
        let anchor = |col: fn(&StudyRow) -> f64| {
            self.rows
                .iter()
                .filter(|r| r.h == h_hi && col(r).is_finite())
                .map(col)
                .fold(f64::NAN, f64::max)
        };
        let _ = writeln!(s, "set xrange [{}:{}]", sig9(0.8 * h_lo), sig9(1.25 * h_hi));
        let _ = writeln!(
            s,
            "slope1(x) = {} * (x / {})",
            sig9(anchor(|r| r.err_h1)),
            sig9(h_hi)
        );
        let _ = writeln!(
            s,
            "slope2(x) = {} * (x / {})**2",
            sig9(anchor(|r| r.err_l2)),
            sig9(h_hi)
        );
        let mut curves = Vec::new();
        for f in &self.fits {
            let lam = sig9(f.lambda);
            let filter = format!("(strcol(6) eq '{lam}' ? $8 : 1/0)");
            curves.push(format!(
                "'{csv_file}' skip 1 using {filter}:10 with linespoints title 'L2, lambda={lam}'"
            ));
            curves.push(format!(
                "'{csv_file}' skip 1 using {filter}:11 with linespoints title 'H1, lambda={lam}'"
            ));
        }
        curves.push("slope1(x) with lines dashtype 2 title 'slope 1'".to_string());
        curves.push("slope2(x) with lines dashtype 3 title 'slope 2'".to_string());
        let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        s
    }

    /// Writes `table.csv`, `rates.csv` and `table.gp` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), self.to_csv())?;
        std::fs::write(dir.join("rates.csv"), self.rates_csv())?;
        std::fs::write(dir.join("table.gp"), self.gnuplot_script("table.csv"))?;
        Ok(())
    }
}

fn run_row(config: &StudyConfig, hierarchy: &MeshHierarchy, n: usize, lambda: f64) -> StudyRow {
    let start = Instant::now();
    let mut row = StudyRow {
        example: config.example.clone(),
        formulation: config.formulation.unwrap_or(Formulation::PureTraction),
        space: config.space,
        scheme: config.scheme,
        refine_type: config.refine_type,
        lambda,
        n,
        h: hierarchy.fine.max_diameter(),
        h_nominal: config.mesh.nominal_h(n),
        ndof: 0,
        err_l2: f64::NAN,
        err_h1: f64::NAN,
        rate_l2: None,
        rate_h1: None,
        backward_error: f64::NAN,
        constraint_residual: f64::NAN,
        seconds: 0.0,
        failure: None,
    };
    let outcome = config.problem(lambda).and_then(|pb| {
        row.formulation = pb.formulation;
        solve_problem(hierarchy, &pb)
    });
    match outcome {
        Ok(o) => {
            row.ndof = o.dofmap.num_dofs();
            row.backward_error = o.result.residual;
            row.constraint_residual = o.constraint_residual;
            if let Some(e) = o.errors {
                row.err_l2 = e.err_l2;
                row.err_h1 = e.err_h1.unwrap_or(f64::NAN);
            }
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn local_rate(prev: &StudyRow, cur: &StudyRow, err: fn(&StudyRow) -> f64) -> Option<f64> {
    fit_rate(&[(prev.h_nominal, err(prev)), (cur.h_nominal, err(cur))]).ok()
}

/// Runs every (mesh, λ) pair of the study. A failed row is reported in the
/// table, not propagated; configuration and mesh errors are.
pub fn convergence_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    let hierarchies: Vec<MeshHierarchy> = config
        .sizes
        .par_iter()
        .map(|&n| refine(&config.coarse_mesh(n)?, config.refine_type))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = config
        .lambdas
        .iter()
        .flat_map(|&l| (0..config.sizes.len()).map(move |i| (i, l)))
        .collect();
    let mut rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(i, l)| run_row(config, &hierarchies[i], config.sizes[i], l))
        .collect();
    let per = config.sizes.len();
    let mut fits = Vec::new();
    for (s, &lambda) in config.lambdas.iter().enumerate() {
        let series = &mut rows[s * per..(s + 1) * per];
        for i in 1..per {
            let (a, b) = series.split_at_mut(i);
            b[0].rate_l2 = local_rate(&a[i - 1], &b[0], |r| r.err_l2);
            b[0].rate_h1 = local_rate(&a[i - 1], &b[0], |r| r.err_h1);
        }
        let fit = |err: fn(&StudyRow) -> f64| {
            let pts: Vec<(f64, f64)> = series.iter().map(|r| (r.h_nominal, err(r))).collect();
            fit_rate(&pts).ok()
        };
        fits.push(SeriesFit {
            lambda,
            rate_l2: fit(|r| r.err_l2),
            rate_h1: fit(|r| r.err_h1),
        });
    }
    Ok(ConvergenceTable { rows, fits })
}
