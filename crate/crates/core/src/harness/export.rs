//! Field export (VTK), field files and CSV tables.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::constitutive::StressModel;
use crate::elements::{PairKind, SpacePair};
use crate::error::{Error, Result};
use crate::linalg::{frob, sym, Vec3};
use crate::mesh::{read_ascii, write_ascii, write_file, write_vtk, Triangulation, VtkField};

/// Barycentric coordinates of local vertex `k`.
fn vertex_bary(k: usize) -> [f64; 4] {
    let mut lam = [0.0; 4];
    lam[k] = 1.0;
    lam
}

/// Velocity at every mesh vertex (taken from the lowest-id incident cell).
pub fn vertex_velocity(pair: &SpacePair, u: &[f64]) -> Vec<Vec3> {
    let tri = pair.mesh();
    (0..tri.num_vertices())
        .map(|v| {
            let c = tri.vertex_cells(v)[0];
            let k = tri.cell(c).iter().position(|&w| w == v).expect("incident cell");
            pair.velocity_at(u, c, &vertex_bary(k)).0
        })
        .collect()
}

/// Legacy VTK with point-data velocity and cell-data pressure, `|DU|` and
/// `|S(DU)|` evaluated at barycentres.
pub fn export_fields(pair: &SpacePair, model: &StressModel, u: &[f64], p: &[f64], title: &str) -> String {
    let tri = pair.mesh();
    let d = tri.dim();
    let mut centre = [0.0; 4];
    centre[..=d].fill(1.0 / (d + 1) as f64);
    let mut pressure = Vec::with_capacity(tri.num_cells());
    let mut shear = Vec::with_capacity(tri.num_cells());
    let mut stress = Vec::with_capacity(tri.num_cells());
    for c in 0..tri.num_cells() {
        let ds = sym(&pair.velocity_at(u, c, &centre).1);
        pressure.push(pair.pressure_at(p, c, &centre));
        shear.push(frob(&ds));
        stress.push(frob(&model.stress(&ds)));
    }
    let vel = vertex_velocity(pair, u);
    write_vtk(
        tri,
        title,
        &[
            VtkField::PointVector("velocity", &vel),
            VtkField::CellScalar("pressure", &pressure),
            VtkField::CellScalar("shear_rate", &shear),
            VtkField::CellScalar("stress", &stress),
        ],
    )
}

/// A discrete solution together with its space, as stored on disk:
///
/// ```text
/// PAIR mini
/// VELOCITY 50
/// …one coefficient per line…
/// PRESSURE 9
/// …
/// DIM 2
/// …mesh…
/// ```
pub struct FieldFile {
    pub pair: SpacePair,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

pub fn write_field_file(pair: &SpacePair, u: &[f64], p: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "PAIR {}", pair.kind().name());
    let _ = writeln!(s, "VELOCITY {}", u.len());
    for v in u {
        let _ = writeln!(s, "{v:e}");
    }
    let _ = writeln!(s, "PRESSURE {}", p.len());
    for v in p {
        let _ = writeln!(s, "{v:e}");
    }
    s.push_str(&write_ascii(pair.mesh()));
    s
}

fn block(lines: &mut std::str::Lines<'_>, key: &str) -> Result<Vec<f64>> {
    let head = lines
        .next()
        .ok_or_else(|| Error::parse("field file", format!("missing `{key}` header")))?;
    let n: usize = head
        .strip_prefix(key)
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| Error::parse("field file", format!("expected `{key} <n>`, got `{head}`")))?;
    (0..n)
        .map(|i| {
            lines
                .next()
                .and_then(|l| l.trim().parse().ok())
                .ok_or_else(|| Error::parse("field file", format!("{key}: bad or missing value {i}")))
        })
        .collect()
}

pub fn read_field_file(text: &str) -> Result<FieldFile> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let kind = head
        .strip_prefix("PAIR ")
        .ok_or_else(|| Error::parse("field file", "expected `PAIR <kind>`"))?;
    let kind = PairKind::from_name(kind.trim())?;
    let u = block(&mut lines, "VELOCITY")?;
    let p = block(&mut lines, "PRESSURE")?;
    let rest: Vec<&str> = lines.collect();
    let tri = read_ascii(&rest.join("\n"))?;
    let pair = SpacePair::new(Arc::new(tri), kind)?;
    if u.len() != pair.num_velocity() || p.len() != pair.num_pressure() {
        return Err(Error::parse(
            "field file",
            format!(
                "coefficient counts {}/{} do not match the space ({}/{})",
                u.len(),
                p.len(),
                pair.num_velocity(),
                pair.num_pressure()
            ),
        ));
    }
    Ok(FieldFile { pair, u, p })
}

/// Fixed-width scientific formatting used by every CSV table.
pub fn num(x: f64) -> String {
    // `+ 0.0` folds negative zero
    format!("{:.12e}", x + 0.0)
}

/// CSV table with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("CSV is UTF-8")
    }
}

pub fn save(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(name), contents)
}

/// Reads a mesh from ASCII or legacy VTK, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<Triangulation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("vtk") => crate::mesh::read_vtk_mesh(&text),
        _ => read_ascii(&text),
    }
}
