//! Plain ASCII mesh format and VTK legacy export.
//!
//! ```text
//! DIM 2
//! VERTICES 4
//! CELLS 2
//! 0 0
//! ...
//! 0 1 2
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::Triangulation;
use crate::error::{Error, Result};
use crate::linalg::{Vec3, ZERO3};

pub fn write_ascii(t: &Triangulation) -> String {
    let d = t.dim();
    let mut s = String::new();
    let _ = writeln!(s, "DIM {d}");
    let _ = writeln!(s, "VERTICES {}", t.num_vertices());
    let _ = writeln!(s, "CELLS {}", t.num_cells());
    for x in t.vertices() {
        let row: Vec<String> = x[..d].iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    for c in 0..t.num_cells() {
        let row: Vec<String> = t.cell(c).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

fn header(lines: &mut dyn Iterator<Item = (usize, &str)>, key: &str) -> Result<usize> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse("mesh", format!("missing `{key}` header")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::parse("mesh", format!("line {}: expected `{key} <n>`", no + 1)));
    }
    it.next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse("mesh", format!("line {}: bad count", no + 1)))
}

pub fn read_ascii(text: &str) -> Result<Triangulation> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let dim = header(&mut lines, "DIM")?;
    let nv = header(&mut lines, "VERTICES")?;
    let nc = header(&mut lines, "CELLS")?;
    if !(2..=3).contains(&dim) {
        return Err(Error::parse("mesh", format!("unsupported dimension {dim}")));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse("mesh", "truncated vertex block"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("mesh", format!("line {}: {e}", no + 1)))?;
        if vals.len() != dim {
            return Err(Error::parse("mesh", format!("line {}: expected {dim} coordinates", no + 1)));
        }
        let mut x = ZERO3;
        x[..dim].copy_from_slice(&vals);
        vertices.push(x);
    }
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    for _ in 0..nc {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse("mesh", "truncated cell block"))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("mesh", format!("line {}: {e}", no + 1)))?;
        if vals.len() != dim + 1 {
            return Err(Error::parse("mesh", format!("line {}: expected {} indices", no + 1, dim + 1)));
        }
        cells.extend(vals);
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::parse("mesh", format!("line {}: trailing data", no + 1)));
    }
    Triangulation::from_cells(dim, vertices, cells)
}

/// Named data array attached to points or cells.
pub enum VtkField<'a> {
    PointScalar(&'a str, &'a [f64]),
    PointVector(&'a str, &'a [Vec3]),
    CellScalar(&'a str, &'a [f64]),
}

/// VTK legacy ASCII unstructured grid.
pub fn write_vtk(t: &Triangulation, title: &str, fields: &[VtkField<'_>]) -> String {
    let nv = t.dim() + 1;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", t.num_vertices());
    for x in t.vertices() {
        let _ = writeln!(s, "{} {} {}", x[0], x[1], x[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", t.num_cells(), t.num_cells() * (nv + 1));
    for c in 0..t.num_cells() {
        let ids: Vec<String> = t.cell(c).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{nv} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", t.num_cells());
    let ty = if t.dim() == 2 { 5 } else { 10 };
    for _ in 0..t.num_cells() {
        let _ = writeln!(s, "{ty}");
    }
    let point: Vec<_> = fields
        .iter()
        .filter(|f| !matches!(f, VtkField::CellScalar(..)))
        .collect();
    let cell: Vec<_> = fields
        .iter()
        .filter(|f| matches!(f, VtkField::CellScalar(..)))
        .collect();
    if !point.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", t.num_vertices());
        for f in point {
            match f {
                VtkField::PointScalar(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in v.iter() {
                        let _ = writeln!(s, "{x}");
                    }
                }
                VtkField::PointVector(name, v) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for x in v.iter() {
                        let _ = writeln!(s, "{} {} {}", x[0], x[1], x[2]);
                    }
                }
                VtkField::CellScalar(..) => unreachable!(),
            }
        }
    }
    if !cell.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", t.num_cells());
        for f in cell {
            if let VtkField::CellScalar(name, v) = f {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v.iter() {
                    let _ = writeln!(s, "{x}");
                }
            }
        }
    }
    s
}

/// Reads back the geometry of a VTK legacy unstructured grid written by
/// [`write_vtk`]; data arrays are ignored.
pub fn read_vtk_mesh(text: &str) -> Result<Triangulation> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let find = |key: &str| {
        toks.iter()
            .position(|&t| t == key)
            .ok_or_else(|| Error::parse("vtk", format!("missing {key} section")))
    };
    let num = |i: usize| -> Result<usize> {
        toks.get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse("vtk", "bad integer"))
    };
    let fnum = |i: usize| -> Result<f64> {
        toks.get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse("vtk", "bad coordinate"))
    };
    let p = find("POINTS")?;
    let nv = num(p + 1)?;
    let mut vertices = Vec::with_capacity(nv);
    for v in 0..nv {
        let b = p + 3 + 3 * v;
        vertices.push([fnum(b)?, fnum(b + 1)?, fnum(b + 2)?]);
    }
    let c = find("CELLS")?;
    let nc = num(c + 1)?;
    let mut cells = Vec::new();
    let mut pos = c + 3;
    let mut dim = 0;
    for _ in 0..nc {
        let k = num(pos)?;
        dim = k - 1;
        for j in 0..k {
            cells.push(num(pos + 1 + j)?);
        }
        pos += k + 1;
    }
    Triangulation::from_cells(dim, vertices, cells)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
