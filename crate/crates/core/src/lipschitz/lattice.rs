//! Dyadic background lattice covering a padded bounding square of the mesh.

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::mesh::Triangulation;

/// `2^level × 2^level` square cells of side `delta` with lower corner `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub lo: [f64; 2],
    pub side: f64,
    pub level: u32,
}

impl Lattice {
    /// Square of twice the mesh extent, centred on the mesh, refined until
    /// the cell side is at most `resolution`.
    pub fn around(tri: &Triangulation, resolution: f64) -> Result<Self> {
        if tri.dim() != 2 {
            return Err(Error::Unsupported(
                "Lipschitz truncation is implemented for planar meshes only".into(),
            ));
        }
        if !(resolution > 0.0) {
            return Err(Error::invalid("lattice resolution must be positive"));
        }
        let (lo, hi) = tri.bounding_box();
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let side = 2.0 * extent;
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let level = (side / resolution).log2().ceil().max(1.0) as u32;
        if level > 12 {
            return Err(Error::invalid(format!(
                "lattice resolution {resolution:e} needs 2^{level} cells per axis"
            )));
        }
        Ok(Self {
            lo: [c[0] - 0.5 * side, c[1] - 0.5 * side],
            side,
            level,
        })
    }

    pub fn n(&self) -> usize {
        1 << self.level
    }

    pub fn delta(&self) -> f64 {
        self.side / self.n() as f64
    }

    pub fn cell_measure(&self) -> f64 {
        self.delta() * self.delta()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n() + i
    }

    pub fn center(&self, i: usize, j: usize) -> Vec3 {
        let d = self.delta();
        [self.lo[0] + (i as f64 + 0.5) * d, self.lo[1] + (j as f64 + 0.5) * d, 0.0]
    }

    /// Cell containing `x`, if inside the square.
    pub fn locate(&self, x: &Vec3) -> Option<(usize, usize)> {
        let d = self.delta();
        let fi = ((x[0] - self.lo[0]) / d).floor();
        let fj = ((x[1] - self.lo[1]) / d).floor();
        let n = self.n() as f64;
        (fi >= 0.0 && fj >= 0.0 && fi < n && fj < n).then(|| (fi as usize, fj as usize))
    }
}
