//! Lipschitz truncation `v_λ = Σ ψ_j v_j` on `U_λ`, `v_λ = v` on `H_λ`,
//! and its discrete counterpart through the divergence-preserving projector.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::maximal::{LevelSet, MaximalField};
use super::whitney::{CubeGeometry, DyadicCube, WhitneyCover, WhitneyReport};
use crate::elements::{ProjectorPair, SpacePair, CONSTRAINED};
use crate::error::{Error, Result};
use crate::linalg::{frob, norm, Mat3, Vec3, ZERO3};
use crate::mesh::Triangulation;
use crate::quadrature::{gauss_legendre, SimplexRule};

/// Dilation of the partition-of-unity support, `Q* = √(9/8) Q`.
pub const SUPPORT_DILATION: f64 = 1.060_660_171_779_821_2;
/// Plateau of the partition of unity, `(7/8) Q`.
pub const INNER_DILATION: f64 = 0.875;
/// Dilation of the averaging cube, `Q** = (9/8) Q`.
pub const AVERAGE_DILATION: f64 = 1.125;
/// Whitney cubes enumerated down to `δ / 2^ENUM_EXTRA`.
const ENUM_EXTRA: u32 = 2;
/// Random probes per lattice cell of `U` in the truncation checks.
const U_SAMPLES: usize = 24;
const SAMPLE_SEED: u64 = 0x7a5c;

/// A velocity field on a mesh, extended by zero outside it.
pub trait TruncField: Sync {
    fn mesh(&self) -> &Triangulation;
    fn eval_cell(&self, c: usize, lam: &[f64; 4]) -> (Vec3, Mat3);

    fn eval(&self, x: &Vec3) -> Option<(Vec3, Mat3)> {
        let (c, lam) = self.mesh().locate(x).ok()?;
        Some(self.eval_cell(c, &lam))
    }
}

/// A discrete velocity.
pub struct DiscreteVelocity<'a> {
    pub pair: &'a SpacePair,
    pub u: &'a [f64],
}

impl<'a> DiscreteVelocity<'a> {
    pub fn new(pair: &'a SpacePair, u: &'a [f64]) -> Result<Self> {
        if u.len() != pair.num_velocity() {
            return Err(Error::invalid(format!(
                "velocity has {} entries, expected {}",
                u.len(),
                pair.num_velocity()
            )));
        }
        Ok(Self { pair, u })
    }
}

impl TruncField for DiscreteVelocity<'_> {
    fn mesh(&self) -> &Triangulation {
        self.pair.mesh()
    }

    fn eval_cell(&self, c: usize, lam: &[f64; 4]) -> (Vec3, Mat3) {
        self.pair.velocity_at(self.u, c, lam)
    }
}

/// A closed-form field restricted to a mesh.
pub struct MeshField<'a, F> {
    pub mesh: &'a Triangulation,
    pub f: F,
}

impl<F> TruncField for MeshField<'_, F>
where
    F: Fn(&Vec3) -> (Vec3, Mat3) + Sync,
{
    fn mesh(&self) -> &Triangulation {
        self.mesh
    }

    fn eval_cell(&self, c: usize, lam: &[f64; 4]) -> (Vec3, Mat3) {
        (self.f)(&self.mesh.point(c, lam))
    }
}

fn step_kernel(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / t).exp();
        (f, f / (t * t))
    }
}

/// Smooth step rising from 0 at `t ≤ 0` to 1 at `t ≥ 1`, with derivative.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, da) = step_kernel(t);
    let (b, db) = step_kernel(1.0 - t);
    let s = a + b;
    (a / s, (da * b + a * db) / (s * s))
}

/// Tensor-product bump: 1 on `(7/8) Q`, 0 outside `Q*`, smooth in between.
/// Neighbouring supports reach less than `ℓ/16` into a cube, so after
/// normalisation `ψ_j = 1` on `(7/8) Q_j` still holds.
pub fn cube_bump(g: &CubeGeometry, x: &Vec3) -> (f64, [f64; 2]) {
    let c = g.center();
    let a = 0.5 * INNER_DILATION * g.side;
    let b = 0.5 * SUPPORT_DILATION * g.side;
    let mut val = [0.0; 2];
    let mut der = [0.0; 2];
    for k in 0..2 {
        let r = x[k] - c[k];
        let (s, ds) = smooth_step((b - r.abs()) / (b - a));
        val[k] = s;
        der[k] = -ds * r.signum() / (b - a);
    }
    (val[0] * val[1], [der[0] * val[1], val[0] * der[1]])
}

/// Boundary segments of a planar mesh for box-containment tests.
struct DomainTest {
    segments: Vec<[Vec3; 2]>,
}

impl DomainTest {
    fn new(tri: &Triangulation) -> Self {
        let segments = tri
            .facets()
            .iter()
            .filter(|f| f.cells[1].is_none())
            .map(|f| [*tri.vertex(f.vertices[0]), *tri.vertex(f.vertices[1])])
            .collect();
        Self { segments }
    }

    /// Liang–Barsky: does the segment meet the closed box?
    fn segment_hits(s: &[Vec3; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
        let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..2 {
            let p = [-d[k], d[k]];
            let q = [s[0][k] - lo[k], hi[k] - s[0][k]];
            for m in 0..2 {
                if p[m] == 0.0 {
                    if q[m] < 0.0 {
                        return false;
                    }
                } else {
                    let r = q[m] / p[m];
                    if p[m] < 0.0 {
                        t0 = t0.max(r);
                    } else {
                        t1 = t1.min(r);
                    }
                }
            }
        }
        t0 <= t1
    }

    /// Whether the closed box lies in the interior of the mesh.
    fn contains_box(&self, tri: &Triangulation, lo: [f64; 2], hi: [f64; 2]) -> bool {
        if self.segments.iter().any(|s| Self::segment_hits(s, lo, hi)) {
            return false;
        }
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.0];
        tri.locate(&c).is_ok()
    }
}

/// The truncated field, evaluable anywhere.
pub struct Truncation<'a> {
    field: &'a dyn TruncField,
    level: LevelSet,
    cover: WhitneyCover,
    domain: DomainTest,
    h_min: f64,
    values: Mutex<HashMap<DyadicCube, Vec3>>,
    neighbors: Mutex<HashMap<DyadicCube, Vec<DyadicCube>>>,
}

/// Partition-of-unity term at a point.
#[derive(Debug, Clone, Copy)]
pub struct PartitionTerm {
    pub cube: DyadicCube,
    pub psi: f64,
    pub grad: [f64; 2],
}

impl<'a> Truncation<'a> {
    pub fn new(field: &'a dyn TruncField, level: LevelSet) -> Result<Self> {
        if field.mesh().dim() != 2 {
            return Err(Error::Unsupported("truncation needs a planar mesh".into()));
        }
        let cover = WhitneyCover::new(&level, ENUM_EXTRA)?;
        Ok(Self {
            domain: DomainTest::new(field.mesh()),
            h_min: field.mesh().h_min(),
            field,
            level,
            cover,
            values: Mutex::new(HashMap::new()),
            neighbors: Mutex::new(HashMap::new()),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.level.lambda
    }

    pub fn level_set(&self) -> &LevelSet {
        &self.level
    }

    pub fn cover(&self) -> &WhitneyCover {
        &self.cover
    }

    fn neighbors_of(&self, q: &DyadicCube) -> Vec<DyadicCube> {
        if let Some(v) = self.neighbors.lock().unwrap().get(q) {
            return v.clone();
        }
        let v = self.cover.neighbors(q);
        self.neighbors.lock().unwrap().insert(*q, v.clone());
        v
    }

    /// `v_j`: mean of `v` over `Q**` if `Q* ⊂ Ω`, else zero.
    pub fn cube_value(&self, q: &DyadicCube) -> Vec3 {
        if let Some(v) = self.values.lock().unwrap().get(q) {
            return *v;
        }
        let v = self.compute_value(q);
        self.values.lock().unwrap().insert(*q, v);
        v
    }

    fn compute_value(&self, q: &DyadicCube) -> Vec3 {
        let g = self.cover.geometry(q);
        let c = g.center();
        let star = 0.5 * SUPPORT_DILATION * g.side;
        let lo = [c[0] - star, c[1] - star];
        let hi = [c[0] + star, c[1] + star];
        if !self.domain.contains_box(self.field.mesh(), lo, hi) {
            return ZERO3;
        }
        let half = 0.5 * AVERAGE_DILATION * g.side;
        let side = 2.0 * half;
        let m = ((side / (0.5 * self.h_min)).ceil() as usize).clamp(1, 32);
        let (x, w) = gauss_legendre(3);
        let sub = side / m as f64;
        let mut acc = ZERO3;
        for bj in 0..m {
            for bi in 0..m {
                for (a, wa) in x.iter().zip(&w) {
                    for (b, wb) in x.iter().zip(&w) {
                        let p = [
                            c[0] - half + (bi as f64 + a) * sub,
                            c[1] - half + (bj as f64 + b) * sub,
                            0.0,
                        ];
                        if let Some((v, _)) = self.field.eval(&p) {
                            for k in 0..2 {
                                acc[k] += wa * wb * v[k];
                            }
                        }
                    }
                }
            }
        }
        let s = (m * m) as f64;
        [acc[0] / s, acc[1] / s, 0.0]
    }

    /// Normalised partition of unity at a point of `U` (empty on `H`).
    pub fn partition(&self, x: &Vec3) -> Vec<PartitionTerm> {
        if !self.level.contains(x) {
            return Vec::new();
        }
        let Some(q) = self.cover.cube_at(x) else {
            return Vec::new();
        };
        let mut cands = vec![q];
        cands.extend(self.neighbors_of(&q));
        let raw: Vec<(DyadicCube, f64, [f64; 2])> = cands
            .into_iter()
            .map(|c| {
                let (p, g) = cube_bump(&self.cover.geometry(&c), x);
                (c, p, g)
            })
            .filter(|t| t.1 > 0.0 || t.2 != [0.0, 0.0])
            .collect();
        let s: f64 = raw.iter().map(|t| t.1).sum();
        let ds = [raw.iter().map(|t| t.2[0]).sum::<f64>(), raw.iter().map(|t| t.2[1]).sum::<f64>()];
        raw.into_iter()
            .map(|(cube, p, g)| PartitionTerm {
                cube,
                psi: p / s,
                grad: [(g[0] * s - p * ds[0]) / (s * s), (g[1] * s - p * ds[1]) / (s * s)],
            })
            .collect()
    }

    fn blend(&self, terms: &[PartitionTerm]) -> (Vec3, Mat3) {
        let mut v = ZERO3;
        let mut g = [[0.0; 3]; 3];
        for t in terms {
            let vj = self.cube_value(&t.cube);
            for i in 0..2 {
                v[i] += t.psi * vj[i];
                for j in 0..2 {
                    g[i][j] += vj[i] * t.grad[j];
                }
            }
        }
        (v, g)
    }

    /// `(v_λ, ∇v_λ)` at a physical point (zero outside the mesh on `H`).
    pub fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let terms = self.partition(x);
        if terms.is_empty() {
            self.field.eval(x).unwrap_or((ZERO3, [[0.0; 3]; 3]))
        } else {
            self.blend(&terms)
        }
    }

    /// Same, at a point given cell-wise on the mesh.
    pub fn eval_cell(&self, c: usize, lam: &[f64; 4]) -> (Vec3, Mat3) {
        let x = self.field.mesh().point(c, lam);
        let terms = self.partition(&x);
        if terms.is_empty() {
            self.field.eval_cell(c, lam)
        } else {
            self.blend(&terms)
        }
    }
}

/// Checks of a truncation at the lattice centres and on mesh quadrature.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TruncationReport {
    pub lambda: f64,
    /// `|U_λ|`.
    pub level_set_measure: f64,
    pub clipped: bool,
    pub whitney: WhitneyReport,
    /// `max |v_λ − v|` over samples in `H_λ ∩ Ω`.
    pub coincidence_residual: f64,
    /// `max |v_λ|` over samples outside `Ω`.
    pub boundary_residual: f64,
    /// `sup |∇v_λ| / λ` over samples in `Ω`.
    pub gradient_bound: f64,
    /// Same, restricted to `U_λ`.
    pub gradient_bound_in_u: f64,
    /// `max ℓ_j |∇ψ_j|` over samples in `U_λ`.
    pub partition_constant: f64,
    /// `λ |U_λ| / ‖∇v‖_1`.
    pub weak_type: f64,
    /// `‖v_λ‖_s / ‖v‖_s` for `s = 1, 2, ∞`.
    pub value_ratio: [f64; 3],
    /// `‖∇v_λ‖_s / ‖∇v‖_s` for `s = 1, 2, ∞`.
    pub gradient_ratio: [f64; 3],
    /// `max |v_j − v_k| / (λ ℓ_j)` over touching enumerated cubes.
    pub mean_jump: f64,
}

/// `[‖·‖_1, ‖·‖_2, ‖·‖_∞]` accumulators.
#[derive(Default, Clone, Copy)]
struct Norms([f64; 3]);

impl Norms {
    fn add(&mut self, w: f64, a: f64) {
        self.0[0] += w * a;
        self.0[1] += w * a * a;
        self.0[2] = self.0[2].max(a);
    }

    fn finish(self) -> [f64; 3] {
        [self.0[0], self.0[1].sqrt(), self.0[2]]
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Truncates `field` at level `lambda` of its gradient maximal function and
/// checks the result.
pub fn lipschitz_truncate<'a>(
    field: &'a dyn TruncField,
    maximal: &MaximalField,
    lambda: f64,
) -> Result<(Truncation<'a>, TruncationReport)> {
    let level = maximal.level_set(lambda)?;
    let trunc = Truncation::new(field, level)?;
    let whitney = trunc.cover.check();
    let tri = field.mesh();
    let lat = maximal.lattice().clone();
    let n = lat.n();

    let mut coincidence: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    let mut grad_all: f64 = 0.0;
    let mut grad_u: f64 = 0.0;
    let mut pconst: f64 = 0.0;
    // U is probed at seeded random points (the partition is flat away from
    // the thin transition collars), H at the lattice centres
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let d = lat.delta();
    let mut samples = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if trunc.level.inside(i, j) {
                for _ in 0..U_SAMPLES {
                    let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                    samples.push([lat.lo[0] + (i as f64 + a) * d, lat.lo[1] + (j as f64 + b) * d, 0.0]);
                }
            } else {
                samples.push(lat.center(i, j));
            }
        }
    }
    for x in samples {
        let orig = field.eval(&x);
        let terms = trunc.partition(&x);
        let (v, g) = if terms.is_empty() {
            trunc.eval(&x)
        } else {
            trunc.blend(&terms)
        };
        for t in &terms {
            let l = trunc.cover.side(&t.cube);
            pconst = pconst.max(l * t.grad[0].hypot(t.grad[1]));
        }
        match orig {
            Some((v0, _)) => {
                if terms.is_empty() {
                    coincidence = coincidence.max(norm(&crate::linalg::sub(&v, &v0)));
                }
                let r = frob(&g) / lambda;
                grad_all = grad_all.max(r);
                if !terms.is_empty() {
                    grad_u = grad_u.max(r);
                }
            }
            None => boundary = boundary.max(norm(&v)),
        }
    }

    // norms on the mesh
    let rule = SimplexRule::collapsed(2, 4);
    let mut nv = Norms::default();
    let mut ng = Norms::default();
    let mut tv = Norms::default();
    let mut tg = Norms::default();
    for c in 0..tri.num_cells() {
        let m = tri.measure(c);
        for (lam, &w) in rule.bary.iter().zip(&rule.weights) {
            let (v0, g0) = field.eval_cell(c, lam);
            let (v1, g1) = trunc.eval_cell(c, lam);
            nv.add(w * m, norm(&v0));
            ng.add(w * m, frob(&g0));
            tv.add(w * m, norm(&v1));
            tg.add(w * m, frob(&g1));
            grad_all = grad_all.max(frob(&g1) / lambda);
        }
    }
    let (nv, ng, tv, tg) = (nv.finish(), ng.finish(), tv.finish(), tg.finish());
    let value_ratio = [0, 1, 2].map(|k| ratio(tv[k], nv[k]));
    let gradient_ratio = [0, 1, 2].map(|k| ratio(tg[k], ng[k]));

    let mut mean_jump: f64 = 0.0;
    for q in trunc.cover.cubes() {
        let vq = trunc.cube_value(q);
        let l = trunc.cover.side(q);
        for m in trunc.neighbors_of(q) {
            let vm = trunc.cube_value(&m);
            mean_jump = mean_jump.max(norm(&crate::linalg::sub(&vq, &vm)) / (lambda * l));
        }
    }

    let u_measure = trunc.level.measure();
    let report = TruncationReport {
        lambda,
        level_set_measure: u_measure,
        clipped: trunc.level.clipped,
        whitney,
        coincidence_residual: coincidence,
        boundary_residual: boundary,
        gradient_bound: grad_all,
        gradient_bound_in_u: grad_u,
        partition_constant: pconst,
        weak_type: ratio(lambda * u_measure, ng[0]),
        value_ratio,
        gradient_ratio,
        mean_jump,
    };
    Ok((trunc, report))
}

/// Separating-axis test between a triangle and an open axis-aligned square.
fn triangle_meets_square(t: &[[f64; 2]; 3], lo: [f64; 2], hi: [f64; 2]) -> bool {
    for k in 0..2 {
        let a = t.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let b = t.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        if b <= lo[k] || a >= hi[k] {
            return false;
        }
    }
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    for e in 0..3 {
        let p = t[e];
        let q = t[(e + 1) % 3];
        let nrm = [q[1] - p[1], p[0] - q[0]];
        let proj = |x: &[f64; 2]| nrm[0] * x[0] + nrm[1] * x[1];
        let ta = t.iter().map(proj).fold(f64::INFINITY, f64::min);
        let tb = t.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);
        let sa = corners.iter().map(proj).fold(f64::INFINITY, f64::min);
        let sb = corners.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);
        if tb <= sa || sb <= ta {
            return false;
        }
    }
    true
}

/// Cells meeting `U`, then `Ωⁿ_λ` as the union of their vertex patches.
/// Returns `(touching, omega)` cell masks.
pub fn discrete_level_region(tri: &Triangulation, u: &LevelSet) -> (Vec<bool>, Vec<bool>) {
    let lat = &u.lattice;
    let d = lat.delta();
    let n = lat.n();
    let mut touching = vec![false; tri.num_cells()];
    if !u.is_empty() {
        for (c, t) in touching.iter_mut().enumerate() {
            let vs = tri.cell(c);
            let pts = [0, 1, 2].map(|k| [tri.vertex(vs[k])[0], tri.vertex(vs[k])[1]]);
            let range = |k: usize| {
                let a = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let b = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                let i0 = ((a - lat.lo[k]) / d).floor().max(0.0) as usize;
                let i1 = (((b - lat.lo[k]) / d).floor() as usize).min(n - 1);
                i0..=i1
            };
            'scan: for j in range(1) {
                for i in range(0) {
                    if !u.inside(i, j) {
                        continue;
                    }
                    let lo = [lat.lo[0] + i as f64 * d, lat.lo[1] + j as f64 * d];
                    if triangle_meets_square(&pts, lo, [lo[0] + d, lo[1] + d]) {
                        *t = true;
                        break 'scan;
                    }
                }
            }
        }
    }
    let mut omega = vec![false; tri.num_cells()];
    for c in 0..tri.num_cells() {
        if touching[c] {
            for &v in tri.cell(c) {
                for &m in tri.vertex_cells(v) {
                    omega[m] = true;
                }
            }
        }
    }
    (touching, omega)
}

/// Outcome of [`discrete_truncate`].
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiscreteTruncationReport {
    pub lambda: f64,
    pub level_set_measure: f64,
    /// `|Ωⁿ_λ|`.
    pub region_measure: f64,
    pub region_cells: usize,
    /// `max |Vₙλ − V|` over DOFs of cells outside `Ωⁿ_λ`, relative to `max |V|`.
    pub unchanged_residual: f64,
    /// Largest `κ ≤ 1` with `Ωⁿ_λ ⊆ U_{κλ}` on the lattice samples.
    pub kappa: f64,
    /// `‖Vₙλ‖_{1,2} / ‖V‖_{1,2}`.
    pub h1_ratio: f64,
    /// `sup |∇Vₙλ| / λ` at quadrature points.
    pub gradient_bound: f64,
}

/// `Vₙλ = Π(V_λ)` with the pair's divergence-preserving projector.
pub fn discrete_truncate(
    pair: &SpacePair,
    projector: &ProjectorPair,
    u: &[f64],
    maximal: &MaximalField,
    lambda: f64,
) -> Result<(Vec<f64>, DiscreteTruncationReport)> {
    let field = DiscreteVelocity::new(pair, u)?;
    let level = maximal.level_set(lambda)?;
    let tri = pair.mesh();
    let (_, omega) = discrete_level_region(tri, &level);
    let trunc = Truncation::new(&field, level)?;
    let w = projector.project_velocity(pair, &|c, lam| trunc.eval_cell(c, lam).0)?;

    let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut unchanged: f64 = 0.0;
    for c in (0..tri.num_cells()).filter(|&c| !omega[c]) {
        for &d in pair.velocity_dofs(c) {
            if d != CONSTRAINED {
                unchanged = unchanged.max((w[d] - u[d]).abs() / scale);
            }
        }
    }

    let lat = maximal.lattice();
    let mut kappa: f64 = 1.0;
    for j in 0..lat.n() {
        for i in 0..lat.n() {
            if let Ok((c, _)) = tri.locate(&lat.center(i, j)) {
                if omega[c] {
                    kappa = kappa.min(maximal.value(i, j) / lambda);
                }
            }
        }
    }

    let rule = pair.default_rule();
    let (mut a, mut b) = (0.0, 0.0);
    let mut gb: f64 = 0.0;
    for c in 0..tri.num_cells() {
        let m = tri.measure(c);
        for (lam, &q) in rule.bary.iter().zip(&rule.weights) {
            let (v0, g0) = pair.velocity_at(u, c, lam);
            let (v1, g1) = pair.velocity_at(&w, c, lam);
            a += q * m * (norm(&v1).powi(2) + frob(&g1).powi(2));
            b += q * m * (norm(&v0).powi(2) + frob(&g0).powi(2));
            gb = gb.max(frob(&g1) / lambda);
        }
    }
    let region_cells = omega.iter().filter(|&&o| o).count();
    let region_measure = (0..tri.num_cells()).filter(|&c| omega[c]).map(|c| tri.measure(c)).sum();
    let report = DiscreteTruncationReport {
        lambda,
        level_set_measure: trunc.level_set().measure(),
        region_measure,
        region_cells,
        unchanged_residual: unchanged,
        kappa,
        h1_ratio: ratio(a.sqrt(), b.sqrt()),
        gradient_bound: gb,
    };
    Ok((w, report))
}
