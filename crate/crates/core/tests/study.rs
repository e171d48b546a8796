use polyvem::analysis::{convergence_study, ConvergenceTable, MeshFamily, StudyConfig};
use polyvem::local::{SchemeKind, SpaceKind};
use polyvem::mesh::{generate_voronoi, RefineType};
use polyvem::system::Formulation;

fn config(
    space: SpaceKind,
    scheme: SchemeKind,
    mesh: MeshFamily,
    sizes: Vec<usize>,
    lambdas: Vec<f64>,
) -> StudyConfig {
    StudyConfig {
        example: "example1".into(),
        space,
        scheme,
        refine_type: RefineType::Type1,
        mesh,
        sizes,
        lambdas,
        mu: 1.0,
        formulation: None,
        boundary: None,
        t_c: 0.0,
        seed: 0,
        lloyd_iters: 30,
        linear_a: None,
        linear_b: None,
        output_dir: None,
    }
}

fn series(t: &ConvergenceTable, lambda: f64) -> Vec<(f64, f64)> {
    let mut rows: Vec<_> = t.rows.iter().filter(|r| r.lambda == lambda).collect();
    rows.sort_by_key(|r| r.n);
    rows.iter().map(|r| (r.err_l2, r.err_h1)).collect()
}

#[test]
fn errors_decay_monotonically_for_every_space() {
    for (space, scheme) in [
        (SpaceKind::NCOriginal, SchemeKind::ReducedRot),
        (SpaceKind::NCEnhanced, SchemeKind::UnifiedReduced),
        (SpaceKind::Conforming, SchemeKind::UnifiedReduced),
    ] {
        let t = convergence_study(&config(
            space,
            scheme,
            MeshFamily::Quad,
            vec![2, 4, 8],
            vec![1.0],
        ))
        .unwrap();
        assert!(t.rows.iter().all(|r| r.failure.is_none()));
        let s = series(&t, 1.0);
        for w in s.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{space:?}: {s:?}");
        }
    }
}

#[test]
fn errors_do_not_grow_with_lambda() {
    let t = convergence_study(&config(
        SpaceKind::NCOriginal,
        SchemeKind::ReducedRot,
        MeshFamily::Tri,
        vec![4, 8],
        vec![1e2, 1e5, 1e8],
    ))
    .unwrap();
    let base = series(&t, 1e2);
    for lambda in [1e5, 1e8] {
        for (a, b) in base.iter().zip(series(&t, lambda)) {
            assert!(
                (b.0 - a.0).abs() <= 0.05 * a.0,
                "L2 at {lambda:e}: {} vs {}",
                b.0,
                a.0
            );
            assert!(
                (b.1 - a.1).abs() <= 0.05 * a.1,
                "H1 at {lambda:e}: {} vs {}",
                b.1,
                a.1
            );
        }
    }
}

#[test]
fn pure_displacement_runs_with_unified_scheme() {
    let mut c = config(
        SpaceKind::NCEnhanced,
        SchemeKind::UnifiedReduced,
        MeshFamily::Quad,
        vec![2, 4],
        vec![1e6],
    );
    c.formulation = Some(Formulation::PureDisplacement);
    c.example = "example3".into();
    c.refine_type = RefineType::Type2;
    let t = convergence_study(&c).unwrap();
    let s = series(&t, 1e6);
    assert!(s[1].0 < s[0].0, "{s:?}");
    assert!(t.rows.iter().all(|r| r.backward_error <= 1e-10));
}

#[test]
fn studies_are_deterministic() {
    let c = config(
        SpaceKind::NCOriginal,
        SchemeKind::ReducedRot,
        MeshFamily::Voronoi,
        vec![8, 16],
        vec![1.0, 1e6],
    );
    let a = convergence_study(&c).unwrap();
    let b = convergence_study(&c).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.n, x.lambda, x.ndof), (y.n, y.lambda, y.ndof));
        assert_eq!(x.err_l2.to_bits(), y.err_l2.to_bits());
        assert_eq!(x.err_h1.to_bits(), y.err_h1.to_bits());
    }
    assert_eq!(a.rates_csv(), b.rates_csv());
}

#[test]
fn voronoi_seed_controls_the_mesh() {
    let a = generate_voronoi(20, 10, 7).unwrap();
    let b = generate_voronoi(20, 10, 7).unwrap();
    let c = generate_voronoi(20, 10, 8).unwrap();
    assert_eq!(a.vertices(), b.vertices());
    assert_eq!(a.elements(), b.elements());
    assert_ne!(a.vertices(), c.vertices());
}

#[test]
fn written_outputs_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let t = convergence_study(&config(
        SpaceKind::NCOriginal,
        SchemeKind::ReducedRot,
        MeshFamily::Quad,
        vec![2, 4],
        vec![1.0],
    ))
    .unwrap();
    t.write(dir.path()).unwrap();
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for (row, r) in rows.iter().zip(&t.rows) {
        let l2: f64 = row[col("errL2")].parse().unwrap();
        assert!((l2 - r.err_l2).abs() <= 1e-8 * r.err_l2);
    }
    assert!(dir.path().join("rates.csv").exists());
    assert!(std::fs::read_to_string(dir.path().join("table.gp"))
        .unwrap()
        .contains("logscale"));
}
