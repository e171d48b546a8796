//! Clipped Voronoi diagrams of the unit square with Lloyd relaxation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PolygonalMesh;
use crate::error::{Result, VemError};
use crate::geometry::{polygon_centroid, signed_area, Point, Vector};

const MERGE_TOL: f64 = 1e-9;

/// Keeps the part of `poly` on the side of the line through `p` with outward
/// normal `n`, i.e. `(x - p)·n <= 0`.
fn clip(poly: &[Point], p: &Point, n: &Vector) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let a = &poly[i];
        let b = &poly[(i + 1) % m];
        let da = (a - p).dot(n);
        let db = (b - p).dot(n);
        if da <= 0.0 {
            out.push(*a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn dedup_cycle(poly: Vec<Point>) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().is_none_or(|q| (p - q).norm() > MERGE_TOL) {
            out.push(p);
        }
    }
    while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= MERGE_TOL {
        out.pop();
    }
    out
}

fn cells(seeds: &[Point]) -> Result<Vec<Vec<Point>>> {
    let square = vec![
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ];
    let mut out = Vec::with_capacity(seeds.len());
    for (i, s) in seeds.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = seeds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, q)| ((q - s).norm(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut poly = square.clone();
        for &(d, j) in &order {
            if d < 1e-12 {
                return Err(VemError::GenerationFailure(format!(
                    "seeds {i} and {j} coincide at ({:.6}, {:.6})",
                    s.x, s.y
                )));
            }
            let reach = poly.iter().map(|p| (p - s).norm()).fold(0.0, f64::max);
            if 0.5 * d > reach {
                break;
            }
            let q = &seeds[j];
            poly = clip(&poly, &nalgebra::center(s, q), &(q - s));
        }
        let poly = dedup_cycle(poly);
        if poly.len() < 3 || !(signed_area(&poly) > 0.0) {
            return Err(VemError::GenerationFailure(format!(
                "Voronoi cell of seed {i} is degenerate"
            )));
        }
        out.push(poly);
    }
    Ok(out)
}

fn snap(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        0.0
    } else if (t - 1.0).abs() < 1e-12 {
        1.0
    } else {
        t
    }
}

/// Merges coincident cell corners into shared vertices.
fn weld(cells: &[Vec<Point>]) -> Result<PolygonalMesh> {
    let inv = 1.0 / (10.0 * MERGE_TOL);
    let key = |p: &Point| ((p.x * inv).floor() as i64, (p.y * inv).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut elements = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut cycle: Vec<usize> = Vec::with_capacity(cell.len());
        for p in cell {
            let p = Point::new(snap(p.x), snap(p.y));
            let (kx, ky) = key(&p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                        for &v in list {
                            if (vertices[v] - p).norm() <= MERGE_TOL {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                vertices.push(p);
                grid.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if cycle.last() != Some(&v) {
                cycle.push(v);
            }
        }
        while cycle.len() > 1 && cycle.first() == cycle.last() {
            cycle.pop();
        }
        elements.push(cycle);
    }
    PolygonalMesh::new(vertices, elements)
        .map_err(|e| VemError::GenerationFailure(format!("welded Voronoi mesh is invalid: {e}")))
}

/// Voronoi mesh of the given seeds after `lloyd_iters` centroid updates.
pub fn voronoi_from_seeds(seeds: &[Point], lloyd_iters: usize) -> Result<PolygonalMesh> {
    if seeds.len() < 2 {
        return Err(VemError::InvalidArgument(
            "Voronoi mesh needs at least 2 seeds".into(),
        ));
    }
    if let Some(s) = seeds
        .iter()
        .find(|s| !(s.x > 0.0 && s.x < 1.0 && s.y > 0.0 && s.y < 1.0))
    {
        return Err(VemError::InvalidArgument(format!(
            "seed ({}, {}) lies outside the open unit square",
            s.x, s.y
        )));
    }
    let mut seeds = seeds.to_vec();
    let mut polys = cells(&seeds)?;
    for _ in 0..lloyd_iters {
        seeds = polys.iter().map(|p| polygon_centroid(p)).collect();
        polys = cells(&seeds)?;
    }
    weld(&polys)
}

/// Centroidal-ish Voronoi tessellation of the unit square from
/// `n_seeds` uniformly drawn seeds.
pub fn generate_voronoi(
    n_seeds: usize,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<PolygonalMesh> {
    if n_seeds < 2 {
        return Err(VemError::InvalidArgument(
            "Voronoi mesh needs at least 2 seeds".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<Point> = (0..n_seeds)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            Point::new(x.clamp(1e-9, 1.0 - 1e-9), y.clamp(1e-9, 1.0 - 1e-9))
        })
        .collect();
    voronoi_from_seeds(&seeds, lloyd_iters)
}
