//! `polyvem`: mesh tools, single solves and convergence studies.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyvem::analysis::{
    convergence_study, projected_coefficients, solve_problem, ConvergenceTable, SolveConfig,
    SolveOutcome, StudyConfig,
};
use polyvem::mesh::{
    check_c0, distort, generate_structured_quads, generate_uniform_triangulation, generate_voronoi,
    load_mesh, refine, save_mesh, save_parents, MeshHierarchy, PolygonalMesh, RefineType,
};
use polyvem::VemError;

#[derive(Parser)]
#[command(
    name = "polyvem",
    version,
    about = "Locking-free virtual element solver for planar linear elasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, refine, distort or audit meshes.
    Mesh {
        #[command(subcommand)]
        action: MeshCommand,
    },
    /// Solve one problem described by a JSON config.
    Solve { config: PathBuf },
    /// Run a convergence study described by a JSON config.
    Study { config: PathBuf },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Uniform triangulation of the unit square with `n` cells per side.
    GenTri {
        #[arg(long)]
        n: usize,
        #[arg(short)]
        o: PathBuf,
    },
    /// `n × n` squares, optionally distorted.
    GenQuad {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        tc: f64,
        #[arg(short)]
        o: PathBuf,
    },
    /// Lloyd-relaxed clipped Voronoi mesh with `n` cells.
    GenVoronoi {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        lloyd: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short)]
        o: PathBuf,
    },
    /// Refine a coarse mesh; optionally write the parent map.
    Refine {
        #[arg(long = "type")]
        refine_type: u8,
        #[arg(short)]
        i: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[arg(long)]
        parents: Option<PathBuf>,
    },
    /// Move interior vertices by the sinusoidal distortion map.
    Distort {
        #[arg(long)]
        tc: f64,
        #[arg(short)]
        i: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// Check the star-shapedness and vertex-separation bounds.
    Check {
        #[arg(long)]
        gamma1: f64,
        #[arg(long)]
        gamma2: f64,
        #[arg(short)]
        i: PathBuf,
    },
}

const EXIT_INVALID: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_STUDY_ROW: u8 = 5;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Exit code for an error raised while building meshes.
fn mesh_failure(e: VemError) -> Failure {
    let code = match e {
        VemError::InvalidArgument(_) | VemError::Parse { .. } | VemError::Io(_) => EXIT_INVALID,
        _ => EXIT_GENERATION,
    };
    Failure::new(code, e.to_string())
}

/// Exit code for an error raised while assembling or solving.
fn solve_failure(e: VemError) -> Failure {
    let code = match e {
        VemError::InvalidArgument(_) | VemError::Parse { .. } | VemError::Io(_) => EXIT_INVALID,
        VemError::GenerationFailure(_)
        | VemError::DistortionFailure { .. }
        | VemError::RefinementFailure(_)
        | VemError::Topology(_) => EXIT_GENERATION,
        _ => EXIT_SOLVER,
    };
    Failure::new(code, e.to_string())
}

fn summary(mesh: &PolygonalMesh) -> String {
    format!(
        "{} vertices, {} edges, {} elements",
        mesh.num_vertices(),
        mesh.num_edges(),
        mesh.num_elements()
    )
}

fn write_mesh_file(mesh: &PolygonalMesh, path: &Path) -> Result<(), Failure> {
    save_mesh(mesh, path).map_err(mesh_failure)?;
    println!("wrote {}: {}", path.display(), summary(mesh));
    Ok(())
}

fn cmd_mesh(action: MeshCommand) -> Result<(), Failure> {
    match action {
        MeshCommand::GenTri { n, o } => write_mesh_file(
            &generate_uniform_triangulation(n).map_err(mesh_failure)?,
            &o,
        ),
        MeshCommand::GenQuad { n, tc, o } => {
            let mut mesh = generate_structured_quads(n).map_err(mesh_failure)?;
            if tc != 0.0 {
                mesh = distort(&mesh, tc).map_err(mesh_failure)?;
            }
            write_mesh_file(&mesh, &o)
        }
        MeshCommand::GenVoronoi { n, lloyd, seed, o } => {
            write_mesh_file(&generate_voronoi(n, lloyd, seed).map_err(mesh_failure)?, &o)
        }
        MeshCommand::Refine {
            refine_type,
            i,
            o,
            parents,
        } => {
            let t = RefineType::from_code(refine_type).ok_or_else(|| {
                Failure::new(
                    EXIT_INVALID,
                    format!("refine type must be 1, 2 or 3, got {refine_type}"),
                )
            })?;
            let coarse = load_mesh(&i).map_err(mesh_failure)?;
            let h = refine(&coarse, t).map_err(mesh_failure)?;
            write_mesh_file(&h.fine, &o)?;
            if let Some(p) = parents {
                save_parents(&h.parent_of, t, &p).map_err(mesh_failure)?;
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        MeshCommand::Distort { tc, i, o } => {
            let mesh = load_mesh(&i).map_err(mesh_failure)?;
            write_mesh_file(&distort(&mesh, tc).map_err(mesh_failure)?, &o)
        }
        MeshCommand::Check { gamma1, gamma2, i } => {
            if !(gamma1 > 0.0 && gamma2 > 0.0) {
                return Err(Failure::new(EXIT_INVALID, "gamma bounds must be positive"));
            }
            let mesh = load_mesh(&i).map_err(mesh_failure)?;
            let report = check_c0(&mesh, gamma1, gamma2);
            let mut out = format!(
                "{} min star ratio {:.6} (gamma1 {gamma1}), min vertex ratio {:.6} (gamma2 {gamma2})\nelement,star_ratio,vertex_ratio\n",
                if report.pass { "PASS" } else { "FAIL" },
                report.min_star_ratio,
                report.min_vertex_ratio
            );
            for (k, q) in report.per_element.iter().enumerate() {
                let _ = writeln!(out, "{k},{:.6},{:.6}", q.star_ratio, q.vertex_ratio);
            }
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            Ok(())
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::new(
            EXIT_INVALID,
            format!("invalid config {}: {e}", path.display()),
        )
    })
}

fn output_dir(dir: &Option<String>) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(dir.as_deref().unwrap_or("."));
    fs::create_dir_all(&dir).map_err(|e| {
        Failure::new(
            EXIT_INVALID,
            format!("cannot create {}: {e}", dir.display()),
        )
    })?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| {
        Failure::new(
            EXIT_INVALID,
            format!("cannot write {}: {e}", path.display()),
        )
    })
}

fn solution_csv(o: &SolveOutcome) -> String {
    let n = o.dofmap.n_sites;
    let mut s = String::from("dof,component,site,value\n");
    for (i, v) in o.result.chi.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{v:.16e}", i / n, i % n);
    }
    s
}

fn multipliers_csv(o: &SolveOutcome) -> String {
    let mut s = String::from("kind,index,value\n");
    for (k, b) in o.result.beta.iter().enumerate() {
        let _ = writeln!(s, "beta,{k},{b:.16e}");
    }
    for (k, p) in o.result.pressure.iter().enumerate() {
        let _ = writeln!(s, "pressure,{k},{p:.16e}");
    }
    s
}

fn projection_csv(h: &MeshHierarchy, o: &SolveOutcome) -> Result<String, Failure> {
    let coeffs = projected_coefficients(h, &o.dofmap, &o.result.chi).map_err(solve_failure)?;
    let mut s = String::from("element,vertex,x,y,u1,u2\n");
    for (f, (p, c)) in coeffs.iter().enumerate() {
        for &v in &h.fine.elements()[f] {
            let q = h.fine.vertices()[v];
            let (u1, _) = p.eval(&c[0], &q);
            let (u2, _) = p.eval(&c[1], &q);
            let _ = writeln!(s, "{f},{v},{:.16e},{:.16e},{u1:.16e},{u2:.16e}", q.x, q.y);
        }
    }
    Ok(s)
}

fn cmd_solve(path: &Path) -> Result<(), Failure> {
    let config: SolveConfig = read_config(path)?;
    let study = config.as_study();
    study.validate().map_err(solve_failure)?;
    let problem = study.problem(config.lambda).map_err(solve_failure)?;
    let dir = output_dir(&config.output_dir)?;
    let h = config.hierarchy().map_err(solve_failure)?;
    let o = solve_problem(&h, &problem).map_err(solve_failure)?;
    write_file(&dir.join("solution.csv"), &solution_csv(&o))?;
    write_file(&dir.join("multipliers.csv"), &multipliers_csv(&o))?;
    write_file(&dir.join("projection.csv"), &projection_csv(&h, &o)?)?;
    println!(
        "{} dofs, backward error {:.2e}, constraint residual {:.2e}",
        o.dofmap.num_dofs(),
        o.result.residual,
        o.constraint_residual
    );
    if let Some(e) = &o.errors {
        let h1 = e.err_h1.map(|v| format!("{v:.8e}")).unwrap_or_default();
        let csv = format!(
            "h,ndof,errL2,errH1\n{:.8e},{},{:.8e},{h1}\n",
            e.h, e.ndof, e.err_l2
        );
        write_file(&dir.join("errors.csv"), &csv)?;
        println!("ErrL2 = {:.8e}", e.err_l2);
        if let Some(v) = e.err_h1 {
            println!("ErrH1 = {v:.8e}");
        }
    }
    Ok(())
}

fn print_rates(t: &ConvergenceTable) {
    for f in &t.fits {
        let show = |r: Option<f64>| r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "lambda {:e}: rate L2 {}, rate H1 {}",
            f.lambda,
            show(f.rate_l2),
            show(f.rate_h1)
        );
    }
}

fn cmd_study(path: &Path) -> Result<(), Failure> {
    let config: StudyConfig = read_config(path)?;
    config.validate().map_err(solve_failure)?;
    let dir = output_dir(&config.output_dir)?;
    let table = convergence_study(&config).map_err(mesh_failure)?;
    table
        .write(&dir)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot write outputs: {e}")))?;
    print_rates(&table);
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|f| format!("n={} lambda={:e}: {f}", r.n, r.lambda))
        })
        .collect();
    if !failed.is_empty() {
        return Err(Failure::new(
            EXIT_STUDY_ROW,
            format!("{} rows failed:\n{}", failed.len(), failed.join("\n")),
        ));
    }
    Ok(())
}

/// `POLYVEM_THREADS` caps the worker pool; 0 or unset means one per core.
fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("POLYVEM_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        Failure::new(
            EXIT_INVALID,
            format!("POLYVEM_THREADS must be a non-negative integer, got `{value}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Mesh { action } => cmd_mesh(action),
        Command::Solve { config } => cmd_solve(&config),
        Command::Study { config } => cmd_study(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
