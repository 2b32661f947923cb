//! Whitney decomposition of an open lattice set into maximal dyadic cubes.
//!
//! A dyadic cube `Q ⊂ U` is admissible when `dist(Q, Uᶜ)² ≥ 64 d ℓ(Q)²`.
//! Admissibility passes to sub-cubes, so the maximal admissible cubes are
//! pairwise disjoint and cover `U`; maximality gives
//! `8√d ℓ ≤ dist(Q, Uᶜ) < 18√d ℓ`. All geometry is in integer units
//! (`2^SUB` units per lattice cell), so these comparisons are exact.
//!
//! Cubes coarser than a chosen depth are enumerated up front; finer ones are
//! found lazily by descending from the root at a query point.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use serde::Serialize;

use super::lattice::Lattice;
use super::maximal::LevelSet;
use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// Sub-levels of the unit grid below the lattice.
const SUB: u32 = 20;
/// Lazy descent stops this many levels above the unit grid.
const DEPTH_MARGIN: u32 = 5;
/// `64 d` for `d = 2`.
const ADMISSIBLE: i128 = 128;
/// `1024 d`: square of the upper Whitney bound `32 √d`.
const UPPER: i128 = 2048;

/// Dyadic sub-square of the lattice square at `level` (level 0 is the whole
/// square).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DyadicCube {
    pub level: u32,
    pub i: i64,
    pub j: i64,
}

impl DyadicCube {
    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self {
            level: self.level - 1,
            i: self.i >> 1,
            j: self.j >> 1,
        })
    }

    pub fn children(&self) -> [Self; 4] {
        let l = self.level + 1;
        let (i, j) = (2 * self.i, 2 * self.j);
        [
            Self { level: l, i, j },
            Self { level: l, i: i + 1, j },
            Self { level: l, i, j: j + 1 },
            Self { level: l, i: i + 1, j: j + 1 },
        ]
    }
}

/// Physical description of a cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeGeometry {
    pub lo: [f64; 2],
    pub side: f64,
}

impl CubeGeometry {
    pub fn center(&self) -> [f64; 2] {
        [self.lo[0] + 0.5 * self.side, self.lo[1] + 0.5 * self.side]
    }
}

/// Outcome of [`WhitneyCover::check`].
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WhitneyReport {
    pub num_cubes: usize,
    pub min_side: f64,
    pub max_side: f64,
    /// No enumerated cube contains another.
    pub disjoint: bool,
    /// Every enumerated cube lies in `U`.
    pub contained: bool,
    /// Every admissible cube at the enumeration depth lies in the family.
    pub covering: bool,
    /// `|U| − Σ |Q|`: the part of `U` left to finer cubes.
    pub uncovered_measure: f64,
    /// Extremes of `dist(Q, Uᶜ) / (√d ℓ(Q))`.
    pub distance_ratio: [f64; 2],
    /// Largest number of touching cubes.
    pub max_neighbors: usize,
    /// Extremes of `ℓ(Q') / ℓ(Q)` over touching pairs.
    pub neighbor_ratio: [f64; 2],
    /// Every `θ Q` reaches `Uᶜ`, `θ = 2 + 64√d`.
    pub reaches_complement: bool,
    pub pass: bool,
}

pub struct WhitneyCover {
    lattice: Lattice,
    k: u32,
    inside: Vec<bool>,
    sat: Vec<i64>,
    depth: u32,
    cubes: Vec<DyadicCube>,
    set: HashSet<DyadicCube>,
    memo: Mutex<HashMap<DyadicCube, bool>>,
}

impl WhitneyCover {
    /// Enumerates the family down to cubes of side `δ / 2^extra` (`δ` the
    /// lattice spacing).
    pub fn new(u: &LevelSet, extra: u32) -> Result<Self> {
        if extra > SUB - DEPTH_MARGIN {
            return Err(Error::invalid(format!("enumeration depth {extra} too large")));
        }
        let lattice = u.lattice.clone();
        let n = lattice.n();
        let inside = u.mask().to_vec();
        let mut sat = vec![0i64; (n + 1) * (n + 1)];
        for j in 0..n {
            for i in 0..n {
                sat[(j + 1) * (n + 1) + i + 1] = sat[j * (n + 1) + i + 1] + sat[(j + 1) * (n + 1) + i]
                    - sat[j * (n + 1) + i]
                    + inside[j * n + i] as i64;
            }
        }
        let mut cover = Self {
            k: lattice.level,
            lattice,
            inside,
            sat,
            depth: 0,
            cubes: Vec::new(),
            set: HashSet::new(),
            memo: Mutex::new(HashMap::new()),
        };
        cover.depth = cover.k + extra;
        let mut stack = vec![DyadicCube { level: 0, i: 0, j: 0 }];
        while let Some(q) = stack.pop() {
            if !cover.meets_u(&q) {
                continue;
            }
            if cover.admissible(&q) {
                cover.cubes.push(q);
            } else if q.level < cover.depth {
                stack.extend(q.children());
            }
        }
        cover.cubes.sort();
        cover.set = cover.cubes.iter().copied().collect();
        Ok(cover)
    }

    fn unit(&self) -> i64 {
        1 << SUB
    }

    fn total(&self) -> i64 {
        1 << (self.k + SUB)
    }

    fn side_units(&self, level: u32) -> i64 {
        1 << (self.k + SUB - level)
    }

    /// Inside-cell count over lattice index ranges (clamped).
    fn inside_count(&self, i0: i64, i1: i64, j0: i64, j1: i64) -> i64 {
        let n = self.lattice.n() as i64;
        let (i0, i1, j0, j1) = (i0.max(0), i1.min(n), j0.max(0), j1.min(n));
        if i0 >= i1 || j0 >= j1 {
            return 0;
        }
        let w = (n + 1) as usize;
        let at = |i: i64, j: i64| self.sat[j as usize * w + i as usize];
        at(i1, j1) - at(i0, j1) - at(i1, j0) + at(i0, j0)
    }

    fn lattice_inside(&self, i: i64, j: i64) -> bool {
        let n = self.lattice.n() as i64;
        i >= 0 && j >= 0 && i < n && j < n && self.inside[(j * n + i) as usize]
    }

    /// Lattice index range `[a, b)` of the cube along one axis.
    fn lattice_range(&self, q: &DyadicCube, idx: i64) -> (i64, i64) {
        if q.level <= self.k {
            let b = 1i64 << (self.k - q.level);
            (idx * b, (idx + 1) * b)
        } else {
            let a = idx >> (q.level - self.k);
            (a, a + 1)
        }
    }

    fn meets_u(&self, q: &DyadicCube) -> bool {
        let (i0, i1) = self.lattice_range(q, q.i);
        let (j0, j1) = self.lattice_range(q, q.j);
        self.inside_count(i0, i1, j0, j1) > 0
    }

    fn in_u(&self, q: &DyadicCube) -> bool {
        let (i0, i1) = self.lattice_range(q, q.i);
        let (j0, j1) = self.lattice_range(q, q.j);
        self.inside_count(i0, i1, j0, j1) == (i1 - i0) * (j1 - j0)
    }

    /// `[lo, hi]` of the cube in units along both axes.
    fn bounds(&self, q: &DyadicCube) -> [[i64; 2]; 2] {
        let s = self.side_units(q.level);
        [[q.i * s, q.i * s + s], [q.j * s, q.j * s + s]]
    }

    fn exterior_distance(&self, b: &[[i64; 2]; 2]) -> i128 {
        let t = self.total();
        b[0][0].min(b[1][0]).min(t - b[0][1]).min(t - b[1][1]).max(0) as i128
    }

    fn cell_distance2(&self, b: &[[i64; 2]; 2], a: i64, c: i64) -> i128 {
        let u = self.unit();
        let gap = |lo: i64, hi: i64, k: i64| -> i128 { (k * u - hi).max(lo - (k + 1) * u).max(0) as i128 };
        let gx = gap(b[0][0], b[0][1], a);
        let gy = gap(b[1][0], b[1][1], c);
        gx * gx + gy * gy
    }

    /// Squared distance to `Uᶜ` restricted to complement cells whose index
    /// window is within `w` units of the cube; `None` if none is closer
    /// than `limit2`.
    fn scan_complement(&self, b: &[[i64; 2]; 2], w: i64, limit2: i128) -> Option<i128> {
        let u = self.unit();
        let n = self.lattice.n() as i64;
        let i0 = (b[0][0] - w).div_euclid(u).max(0);
        let i1 = ((b[0][1] + w - 1).div_euclid(u) + 1).min(n);
        let j0 = (b[1][0] - w).div_euclid(u).max(0);
        let j1 = ((b[1][1] + w - 1).div_euclid(u) + 1).min(n);
        if i0 >= i1 || j0 >= j1 || self.inside_count(i0, i1, j0, j1) == (i1 - i0) * (j1 - j0) {
            return None;
        }
        let mut best: Option<i128> = None;
        for c in j0..j1 {
            for a in i0..i1 {
                if self.lattice_inside(a, c) {
                    continue;
                }
                let d2 = self.cell_distance2(b, a, c);
                if d2 < limit2 && best.is_none_or(|x| d2 < x) {
                    best = Some(d2);
                }
            }
        }
        best
    }

    fn admissible_raw(&self, q: &DyadicCube) -> bool {
        if !self.in_u(q) {
            return false;
        }
        let s = self.side_units(q.level) as i128;
        let limit2 = ADMISSIBLE * s * s;
        let ext = self.exterior_distance(&self.bounds(q));
        if ext * ext < limit2 {
            return false;
        }
        // ⌈8√2 s⌉ bounds the reach of the test
        let w = (12 * s) as i64;
        self.scan_complement(&self.bounds(q), w, limit2).is_none()
    }

    /// Memoised admissibility test.
    pub fn admissible(&self, q: &DyadicCube) -> bool {
        if let Some(&a) = self.memo.lock().unwrap().get(q) {
            return a;
        }
        let a = self.admissible_raw(q);
        self.memo.lock().unwrap().insert(*q, a);
        a
    }

    /// Exact `dist(Q, Uᶜ)²` in units².
    fn distance2(&self, q: &DyadicCube) -> i128 {
        let b = self.bounds(q);
        let ext = self.exterior_distance(&b);
        let ext2 = ext * ext;
        let mut w = self.side_units(q.level);
        loop {
            let best = self.scan_complement(&b, w, ext2).unwrap_or(ext2);
            if best <= (w as i128) * (w as i128) || w >= self.total() {
                return best;
            }
            w *= 2;
        }
    }

    /// `dist(Q, Uᶜ)` in physical units.
    pub fn distance(&self, q: &DyadicCube) -> f64 {
        (self.distance2(q) as f64).sqrt() * self.scale()
    }

    /// Physical length of one unit.
    fn scale(&self) -> f64 {
        self.lattice.delta() / self.unit() as f64
    }

    pub fn geometry(&self, q: &DyadicCube) -> CubeGeometry {
        let s = self.side_units(q.level);
        let h = self.scale();
        CubeGeometry {
            lo: [
                self.lattice.lo[0] + (q.i * s) as f64 * h,
                self.lattice.lo[1] + (q.j * s) as f64 * h,
            ],
            side: s as f64 * h,
        }
    }

    pub fn side(&self, q: &DyadicCube) -> f64 {
        self.side_units(q.level) as f64 * self.scale()
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Level of the finest enumerated cubes.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn to_units(&self, x: &Vec3) -> Option<[i64; 2]> {
        let h = self.scale();
        let ux = ((x[0] - self.lattice.lo[0]) / h).floor();
        let uy = ((x[1] - self.lattice.lo[1]) / h).floor();
        let t = self.total() as f64;
        (ux >= 0.0 && uy >= 0.0 && ux < t && uy < t).then(|| [ux as i64, uy as i64])
    }

    fn cube_at_units(&self, p: [i64; 2]) -> Option<DyadicCube> {
        let u = self.unit();
        if !self.lattice_inside(p[0] / u, p[1] / u) {
            return None;
        }
        for level in 1..=(self.k + SUB - DEPTH_MARGIN) {
            let sh = self.k + SUB - level;
            let q = DyadicCube {
                level,
                i: p[0] >> sh,
                j: p[1] >> sh,
            };
            if self.admissible(&q) {
                return Some(q);
            }
        }
        None
    }

    /// Whitney cube containing `x` (any depth); `None` outside `U` or
    /// within a negligible distance of `∂U`.
    pub fn cube_at(&self, x: &Vec3) -> Option<DyadicCube> {
        self.to_units(x).and_then(|p| self.cube_at_units(p))
    }

    /// Whitney cubes touching `q` (excluding `q`), found by probing just
    /// outside its boundary.
    pub fn neighbors(&self, q: &DyadicCube) -> Vec<DyadicCube> {
        let s = self.side_units(q.level);
        let [[x0, x1], [y0, y1]] = self.bounds(q);
        let e = (s / 16).max(1);
        let mut probes = Vec::with_capacity(20);
        for k in 0..4 {
            let t = s / 8 + k * s / 4;
            probes.push([x0 + t, y0 - e]);
            probes.push([x0 + t, y1 + e - 1]);
            probes.push([x0 - e, y0 + t]);
            probes.push([x1 + e - 1, y0 + t]);
        }
        probes.extend([[x0 - e, y0 - e], [x1 + e - 1, y0 - e], [x0 - e, y1 + e - 1], [x1 + e - 1, y1 + e - 1]]);
        let t = self.total();
        let mut out: Vec<DyadicCube> = probes
            .into_iter()
            .filter(|p| p[0] >= 0 && p[1] >= 0 && p[0] < t && p[1] < t)
            .filter_map(|p| self.cube_at_units(p))
            .filter(|c| c != q)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Verifies the Whitney properties of the enumerated family.
    pub fn check(&self) -> WhitneyReport {
        let mut disjoint = true;
        let mut contained = true;
        let mut ratio = [f64::INFINITY, 0.0f64];
        let mut reaches = true;
        let mut max_neighbors = 0;
        let mut nratio = [f64::INFINITY, 0.0f64];
        let mut covered = 0.0;
        for q in &self.cubes {
            let mut p = q.parent();
            while let Some(a) = p {
                if self.set.contains(&a) {
                    disjoint = false;
                }
                p = a.parent();
            }
            contained &= self.in_u(q);
            let s = self.side_units(q.level) as i128;
            let d2 = self.distance2(q);
            reaches &= d2 <= UPPER * s * s;
            let r = (d2 as f64).sqrt() / (std::f64::consts::SQRT_2 * s as f64);
            ratio = [ratio[0].min(r), ratio[1].max(r)];
            let nb = self.neighbors(q);
            max_neighbors = max_neighbors.max(nb.len());
            for m in &nb {
                let f = (self.side_units(m.level) as f64) / s as f64;
                nratio = [nratio[0].min(f), nratio[1].max(f)];
            }
            covered += self.side(q).powi(2);
        }
        // every admissible cube at the enumeration depth must be covered
        let mut covering = true;
        let n = self.lattice.n() as i64;
        let sub = 1i64 << (self.depth - self.k);
        'outer: for j in 0..n {
            for i in 0..n {
                if !self.lattice_inside(i, j) {
                    continue;
                }
                for b in 0..sub {
                    for a in 0..sub {
                        let q = DyadicCube {
                            level: self.depth,
                            i: i * sub + a,
                            j: j * sub + b,
                        };
                        if !self.admissible_raw(&q) {
                            continue;
                        }
                        let mut p = Some(q);
                        let mut found = false;
                        while let Some(c) = p {
                            if self.set.contains(&c) {
                                found = true;
                                break;
                            }
                            p = c.parent();
                        }
                        if !found {
                            covering = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        let u_measure = self.inside.iter().filter(|&&b| b).count() as f64 * self.lattice.cell_measure();
        let (min_side, max_side) = self
            .cubes
            .iter()
            .map(|q| self.side(q))
            .fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(s), b.max(s)));
        if self.cubes.is_empty() {
            ratio = [0.0, 0.0];
            nratio = [1.0, 1.0];
        }
        if nratio[0].is_infinite() {
            nratio = [1.0, 1.0];
        }
        let pass = disjoint
            && contained
            && covering
            && reaches
            && (self.cubes.is_empty() || (ratio[0] >= 8.0 && ratio[1] <= 32.0))
            && nratio[0] >= 0.5
            && nratio[1] <= 2.0
            && max_neighbors <= 32;
        WhitneyReport {
            num_cubes: self.cubes.len(),
            min_side: if self.cubes.is_empty() { 0.0 } else { min_side },
            max_side,
            disjoint,
            contained,
            covering,
            uncovered_measure: (u_measure - covered).max(0.0),
            distance_ratio: ratio,
            max_neighbors,
            neighbor_ratio: nratio,
            reaches_complement: reaches,
            pass,
        }
    }
}
