//! Centered Hardy–Littlewood maximal function of a density sampled on a
//! raster, and its super-level sets.
//!
//! The density is averaged over each lattice cell from `q × q` Gauss points,
//! giving a piecewise-constant raster. Ball integrals are then taken row by
//! row: each raster row contributes the exact integral of the raster along
//! the chord through its centre line (from per-row prefix sums), times the row
//! height. The same discretised disk supplies the normaliser, so constant
//! densities are averaged exactly.

use rayon::prelude::*;
use serde::Serialize;

use super::lattice::Lattice;
use crate::elements::SpacePair;
use crate::error::{Error, Result};
use crate::linalg::{frob, Vec3};
use crate::mesh::Triangulation;
use crate::quadrature::gauss_legendre;

/// Sub-samples per lattice cell and direction.
const RASTER_POINTS: usize = 3;

/// Piecewise-constant density on a lattice with point values at the centres.
#[derive(Debug, Clone)]
pub struct Raster {
    lattice: Lattice,
    cells: Vec<f64>,
    prefix: Vec<f64>,
    centers: Vec<f64>,
}

fn sub_points(q: usize) -> Vec<f64> {
    let (x, _) = gauss_legendre(q);
    x
}

impl Raster {
    /// Rasterises a density given at physical points (zero outside the
    /// domain is the caller's business).
    pub fn from_fn(lattice: &Lattice, f: &(dyn Fn(&Vec3) -> f64 + Sync)) -> Self {
        let n = lattice.n();
        let d = lattice.delta();
        let s = sub_points(RASTER_POINTS);
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut cells = vec![0.0; n];
                let mut centers = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for &a in &s {
                        for &b in &s {
                            let x = [
                                lattice.lo[0] + (i as f64 + a) * d,
                                lattice.lo[1] + (j as f64 + b) * d,
                                0.0,
                            ];
                            acc += f(&x);
                        }
                    }
                    cells[i] = acc / (s.len() * s.len()) as f64;
                    centers[i] = f(&lattice.center(i, j));
                }
                (cells, centers)
            })
            .collect();
        let mut cells = Vec::with_capacity(n * n);
        let mut centers = Vec::with_capacity(n * n);
        for (c, z) in rows {
            cells.extend(c);
            centers.extend(z);
        }
        Self::finish(lattice.clone(), cells, centers)
    }

    /// Rasterises a cell-wise density on a mesh; points outside the mesh get
    /// zero. A sample shared by several cells takes the lowest cell id.
    pub fn from_cells(
        lattice: &Lattice,
        tri: &Triangulation,
        g: &(dyn Fn(usize, &[f64; 4]) -> f64 + Sync),
    ) -> Self {
        let n = lattice.n();
        let d = lattice.delta();
        let s = sub_points(RASTER_POINTS);
        // sample slots: q*q sub-points then the centre
        let per = s.len() * s.len() + 1;
        let offsets: Vec<[f64; 2]> = s
            .iter()
            .flat_map(|&b| s.iter().map(move |&a| [a, b]))
            .chain(std::iter::once([0.5, 0.5]))
            .collect();
        let mut vals = vec![0.0; n * n * per];
        let mut claimed = vec![false; n * n * per];
        for c in 0..tri.num_cells() {
            let vs = tri.cell(c);
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for &v in vs {
                for k in 0..2 {
                    lo[k] = lo[k].min(tri.vertex(v)[k]);
                    hi[k] = hi[k].max(tri.vertex(v)[k]);
                }
            }
            let range = |k: usize| {
                let a = ((lo[k] - lattice.lo[k]) / d).floor().max(0.0) as usize;
                let b = (((hi[k] - lattice.lo[k]) / d).floor() as usize).min(n - 1);
                a..=b
            };
            for j in range(1) {
                for i in range(0) {
                    for (k, off) in offsets.iter().enumerate() {
                        let slot = (j * n + i) * per + k;
                        if claimed[slot] {
                            continue;
                        }
                        let x = [
                            lattice.lo[0] + (i as f64 + off[0]) * d,
                            lattice.lo[1] + (j as f64 + off[1]) * d,
                            0.0,
                        ];
                        let mut lam = tri.barycentric(c, &x);
                        if lam[..3].iter().all(|&l| l >= -1e-12) {
                            for l in lam[..3].iter_mut() {
                                *l = l.clamp(0.0, 1.0);
                            }
                            claimed[slot] = true;
                            vals[slot] = g(c, &lam);
                        }
                    }
                }
            }
        }
        let q2 = (per - 1) as f64;
        let cells = (0..n * n)
            .map(|p| vals[p * per..p * per + per - 1].iter().sum::<f64>() / q2)
            .collect();
        let centers = (0..n * n).map(|p| vals[p * per + per - 1]).collect();
        Self::finish(lattice.clone(), cells, centers)
    }

    /// `|∇v|` (Frobenius) of a discrete velocity.
    pub fn gradient_norm(lattice: &Lattice, pair: &SpacePair, u: &[f64]) -> Result<Self> {
        if u.len() != pair.num_velocity() {
            return Err(Error::invalid(format!(
                "velocity has {} entries, expected {}",
                u.len(),
                pair.num_velocity()
            )));
        }
        let g = |c: usize, lam: &[f64; 4]| frob(&pair.velocity_at(u, c, lam).1);
        Ok(Self::from_cells(lattice, pair.mesh(), &g))
    }

    fn finish(lattice: Lattice, cells: Vec<f64>, centers: Vec<f64>) -> Self {
        let n = lattice.n();
        let d = lattice.delta();
        let mut prefix = vec![0.0; n * (n + 1)];
        for j in 0..n {
            for i in 0..n {
                prefix[j * (n + 1) + i + 1] = prefix[j * (n + 1) + i] + d * cells[j * n + i];
            }
        }
        Self {
            lattice,
            cells,
            prefix,
            centers,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Raster value (cell average) of lattice cell `(i, j)`.
    pub fn cell_value(&self, i: usize, j: usize) -> f64 {
        self.cells[self.lattice.index(i, j)]
    }

    /// Point value at the centre of lattice cell `(i, j)`.
    pub fn center_value(&self, i: usize, j: usize) -> f64 {
        self.centers[self.lattice.index(i, j)]
    }

    /// `∫` of the raster over the whole square.
    pub fn integral(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.lattice.cell_measure()
    }

    /// Integral of row `j` from `lo_x` to `x`.
    fn row_primitive(&self, j: usize, x: f64) -> f64 {
        let n = self.lattice.n();
        let d = self.lattice.delta();
        let t = ((x - self.lattice.lo[0]) / d).clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        self.prefix[j * (n + 1) + i] + (t - i as f64) * d * self.cells[j * n + i]
    }

    /// Average over the (row-discretised) ball `B_r(x)`; `None` when no row
    /// centre line meets the ball.
    pub fn ball_average(&self, x: &Vec3, r: f64) -> Option<f64> {
        let n = self.lattice.n();
        let d = self.lattice.delta();
        let y0 = self.lattice.lo[1];
        // rows j with |y_j − x1| < r, y_j = y0 + (j + ½) d
        let jlo = (((x[1] - r - y0) / d - 0.5).ceil()).max(0.0);
        let jhi = (((x[1] + r - y0) / d - 0.5).floor()).min(n as f64 - 1.0);
        if jhi < jlo {
            // ball entirely outside the lattice rows: zero density
            return if x[1] + r < y0 || x[1] - r > y0 + self.lattice.side {
                Some(0.0)
            } else {
                None
            };
        }
        let mut integral = 0.0;
        let mut area = 0.0;
        for j in (jlo as usize)..=(jhi as usize) {
            let dy = y0 + (j as f64 + 0.5) * d - x[1];
            let w2 = r * r - dy * dy;
            if w2 <= 0.0 {
                continue;
            }
            let w = w2.sqrt();
            integral += d * (self.row_primitive(j, x[0] + w) - self.row_primitive(j, x[0] - w));
            area += 2.0 * d * w;
        }
        (area > 0.0).then(|| integral / area)
    }
}

/// Radii used for the supremum over balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusGrid {
    pub radii: Vec<f64>,
}

impl RadiusGrid {
    /// `r_min · 2^k` up to the first value `≥ r_max`.
    pub fn dyadic(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(Error::invalid(format!("bad radius range [{r_min}, {r_max}]")));
        }
        let mut radii = vec![r_min];
        while *radii.last().unwrap() < r_max {
            let r = 2.0 * radii.last().unwrap();
            radii.push(r);
        }
        Ok(Self { radii })
    }

    /// Default grid for a mesh: from `h_min / 2` to the diameter of its
    /// bounding box.
    pub fn for_mesh(tri: &Triangulation) -> Result<Self> {
        let (lo, hi) = tri.bounding_box();
        let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
        Self::dyadic(0.5 * tri.h_min(), diam)
    }

    /// Inserts geometric midpoints; the old radii are kept, so the maximal
    /// function can only grow.
    pub fn refined(&self) -> Self {
        let mut radii = Vec::with_capacity(2 * self.radii.len());
        for w in self.radii.windows(2) {
            radii.push(w[0]);
            radii.push((w[0] * w[1]).sqrt());
        }
        radii.extend(self.radii.last());
        Self { radii }
    }
}

/// `max(local, sup_r ⨍_{B_r(x)} g)`; `local` stands for the `r → 0` limit.
pub fn maximal_at(raster: &Raster, x: &Vec3, local: f64, radii: &RadiusGrid) -> f64 {
    radii
        .radii
        .iter()
        .filter_map(|&r| raster.ball_average(x, r))
        .fold(local.abs(), f64::max)
}

/// The maximal function sampled at the lattice centres.
#[derive(Debug, Clone)]
pub struct MaximalField {
    lattice: Lattice,
    radii: RadiusGrid,
    values: Vec<f64>,
    local: Vec<f64>,
}

/// Evaluates `M g` at every lattice centre.
pub fn maximal_function(raster: &Raster, radii: &RadiusGrid) -> MaximalField {
    let lat = raster.lattice().clone();
    let n = lat.n();
    let values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|p| {
            let (i, j) = (p % n, p / n);
            maximal_at(raster, &lat.center(i, j), raster.center_value(i, j), radii)
        })
        .collect();
    MaximalField {
        local: raster.centers.clone(),
        lattice: lat,
        radii: radii.clone(),
        values,
    }
}

impl MaximalField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn radii(&self) -> &RadiusGrid {
        &self.radii
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.lattice.index(i, j)]
    }

    /// Density point value at the centre of `(i, j)`.
    pub fn local_value(&self, i: usize, j: usize) -> f64 {
        self.local[self.lattice.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value of the lattice cell containing `x` (zero outside the square).
    pub fn value_at(&self, x: &Vec3) -> f64 {
        self.lattice.locate(x).map_or(0.0, |(i, j)| self.value(i, j))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `|{M > t}|` measured with lattice cells.
    pub fn exceedance_measure(&self, t: f64) -> f64 {
        self.values.iter().filter(|&&m| m > t).count() as f64 * self.lattice.cell_measure()
    }

    /// `U_λ = {M > λ}` as a union of lattice cells.
    pub fn level_set(&self, lambda: f64) -> Result<LevelSet> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("truncation level must be positive, got {lambda}")));
        }
        let n = self.lattice.n();
        let mut inside: Vec<bool> = self.values.iter().map(|&m| m > lambda).collect();
        let mut clipped = false;
        for j in 0..n {
            for i in 0..n {
                if (i == 0 || j == 0 || i == n - 1 || j == n - 1) && inside[j * n + i] {
                    inside[j * n + i] = false;
                    clipped = true;
                }
            }
        }
        if clipped {
            log::debug!("level set at λ = {lambda} reaches the edge of the padded lattice");
        }
        Ok(LevelSet {
            lattice: self.lattice.clone(),
            lambda,
            inside,
            clipped,
        })
    }
}

/// Open set `U_λ` as a union of lattice cells; its complement is `H_λ`.
#[derive(Debug, Clone)]
pub struct LevelSet {
    pub lattice: Lattice,
    pub lambda: f64,
    inside: Vec<bool>,
    /// Cells on the outer ring of the lattice were dropped from the set.
    pub clipped: bool,
}

impl LevelSet {
    /// Builds a level set from an explicit cell mask (outer ring dropped).
    pub fn from_mask(lattice: &Lattice, lambda: f64, mut inside: Vec<bool>) -> Result<Self> {
        let n = lattice.n();
        if inside.len() != n * n {
            return Err(Error::invalid("mask size does not match the lattice"));
        }
        let mut clipped = false;
        for j in 0..n {
            for i in 0..n {
                if (i == 0 || j == 0 || i == n - 1 || j == n - 1) && inside[j * n + i] {
                    inside[j * n + i] = false;
                    clipped = true;
                }
            }
        }
        Ok(Self {
            lattice: lattice.clone(),
            lambda,
            inside,
            clipped,
        })
    }

    pub fn inside(&self, i: usize, j: usize) -> bool {
        self.inside[self.lattice.index(i, j)]
    }

    pub fn mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.lattice.locate(x).is_some_and(|(i, j)| self.inside(i, j))
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.lattice.cell_measure()
    }
}
