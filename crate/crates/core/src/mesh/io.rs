//! Text mesh (`.vmesh`) and parent-map (`.par`) files.
//!
//! ```text
//! vmesh 1
//! <nv> <ne>
//! x y            # nv lines, 17 significant digits
//! k i1 ... ik    # ne lines, 0-based counter-clockwise cycles
//! ```
//!
//! The parent file lists, after the header `vpar 1` and `<n_fine> <refine_type>`,
//! the coarse parent of every fine element, one per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PolygonalMesh, RefineType};
use crate::error::{Result, VemError};
use crate::geometry::Point;

/// Non-empty lines with comments stripped, tagged with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> VemError {
    VemError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from `{tok}`")))
}

pub fn read_mesh(text: &str) -> Result<PolygonalMesh> {
    let mut lines = content_lines(text);
    let (l, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty mesh file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["vmesh", "1"] {
        return Err(parse_err(
            l,
            format!("expected `vmesh 1`, found `{header}`"),
        ));
    }
    let (l, counts) = lines
        .next()
        .ok_or_else(|| parse_err(l + 1, "missing counts line"))?;
    let mut tok = counts.split_whitespace();
    let nv: usize = parse_num(l, tok.next(), "vertex count")?;
    let ne: usize = parse_num(l, tok.next(), "element count")?;
    if tok.next().is_some() {
        return Err(parse_err(l, "trailing tokens after counts"));
    }
    let mut last = l;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, body) = lines
            .next()
            .ok_or_else(|| parse_err(last + 1, "unexpected end of file in vertex block"))?;
        let mut tok = body.split_whitespace();
        let x: f64 = parse_num(l, tok.next(), "x coordinate")?;
        let y: f64 = parse_num(l, tok.next(), "y coordinate")?;
        if tok.next().is_some() {
            return Err(parse_err(l, "trailing tokens after vertex"));
        }
        vertices.push(Point::new(x, y));
        last = l;
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (l, body) = lines
            .next()
            .ok_or_else(|| parse_err(last + 1, "unexpected end of file in element block"))?;
        let mut tok = body.split_whitespace();
        let k: usize = parse_num(l, tok.next(), "element vertex count")?;
        let cycle: Vec<usize> = (0..k)
            .map(|_| parse_num(l, tok.next(), "vertex index"))
            .collect::<Result<_>>()?;
        if tok.next().is_some() {
            return Err(parse_err(
                l,
                format!("element declares {k} vertices but lists more"),
            ));
        }
        elements.push(cycle);
        last = l;
    }
    if let Some((l, _)) = lines.next() {
        return Err(parse_err(l, "content after the last element"));
    }
    PolygonalMesh::new(vertices, elements)
}

pub fn write_mesh(mesh: &PolygonalMesh) -> String {
    let mut out = String::new();
    out.push_str("vmesh 1\n");
    let _ = writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_elements());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", p.x, p.y);
    }
    for cycle in mesh.elements() {
        let _ = write!(out, "{}", cycle.len());
        for v in cycle {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    read_mesh(&fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn write_parents(parent_of: &[usize], refine_type: RefineType) -> String {
    let mut out = String::from("vpar 1\n");
    let _ = writeln!(out, "{} {}", parent_of.len(), refine_type.code());
    for p in parent_of {
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn read_parents(text: &str) -> Result<(Vec<usize>, RefineType)> {
    let mut lines = content_lines(text);
    let (l, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty parent file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["vpar", "1"] {
        return Err(parse_err(l, format!("expected `vpar 1`, found `{header}`")));
    }
    let (l, counts) = lines
        .next()
        .ok_or_else(|| parse_err(l + 1, "missing counts line"))?;
    let mut tok = counts.split_whitespace();
    let n: usize = parse_num(l, tok.next(), "fine element count")?;
    let code: u8 = parse_num(l, tok.next(), "refine type")?;
    let refine_type = RefineType::from_code(code)
        .ok_or_else(|| parse_err(l, format!("unknown refine type {code}")))?;
    let mut parents = Vec::with_capacity(n);
    let mut last = l;
    for _ in 0..n {
        let (l, body) = lines
            .next()
            .ok_or_else(|| parse_err(last + 1, "unexpected end of parent list"))?;
        parents.push(parse_num(l, Some(body), "parent index")?);
        last = l;
    }
    Ok((parents, refine_type))
}

pub fn load_parents(path: impl AsRef<Path>) -> Result<(Vec<usize>, RefineType)> {
    read_parents(&fs::read_to_string(path)?)
}

pub fn save_parents(
    parent_of: &[usize],
    refine_type: RefineType,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, write_parents(parent_of, refine_type))?;
    Ok(())
}
