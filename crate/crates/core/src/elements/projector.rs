//! Divergence-preserving velocity projectors and pressure projectors.
//!
//! All velocity projectors start from Scott–Zhang vertex values taken on one
//! edge per vertex (the lowest-id incident edge), using the edge dual basis
//! of P2 so that functions with quadratic edge traces are reproduced. The
//! remaining DOFs then match edge means (quadratic pairs and the
//! rational-bubble pair) and cell moments (bubble pairs). Taylor–Hood needs a
//! global correction since its pressures are continuous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::basis::ScalarSpace;
use super::matrices::ConstrainedSolver;
use super::{edge_point, PairKind, PressureSpace, SpacePair, VectorField, CONSTRAINED};
use crate::error::Result;
use crate::linalg::{dense_solve, frob, norm, vec_max_abs, CsrMatrix, SparseLu, Vec3, ZERO3};
use crate::mesh::local_edges;
use crate::quadrature::{gauss_legendre, SimplexRule};

/// Velocity field given cell-wise: `(cell, barycentric point) ↦ value`.
pub type CellField<'a> = dyn Fn(usize, &[f64; 4]) -> Vec3 + Sync + 'a;
/// Scalar field given cell-wise.
pub type CellScalar<'a> = dyn Fn(usize, &[f64; 4]) -> f64 + Sync + 'a;

const EDGE_POINTS: usize = 8;

/// Edge dual function of the vertex at `s = 0` for P2 on `[0, 1]`.
fn p2_dual(s: f64) -> f64 {
    9.0 - 36.0 * s + 30.0 * s * s
}

/// Where an edge is evaluated: a cell containing it and the local
/// endpoints matching the global (sorted) endpoints.
#[derive(Debug, Clone, Copy)]
struct EdgeSite {
    cell: usize,
    local: [usize; 2],
}

impl EdgeSite {
    /// Barycentric point at parameter `s` from the first to the second
    /// global endpoint.
    fn bary(&self, s: f64) -> [f64; 4] {
        let mut lam = [0.0; 4];
        lam[self.local[0]] = 1.0 - s;
        lam[self.local[1]] = s;
        lam
    }
}

pub struct ProjectorPair {
    rule: SimplexRule,
    edge_site: Vec<EdgeSite>,
    /// Per vertex: the edge used for the Scott–Zhang value and whether the
    /// vertex is its second endpoint.
    sz_edge: Vec<Option<(usize, bool)>>,
    pressure_lu: Option<SparseLu>,
    th: Option<(ConstrainedSolver, usize)>,
}

/// Outcome of [`ProjectorPair::check`].
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StabilityReport {
    pub pair: String,
    /// `max |Π V − V| / max |V|` for a random member `V`.
    pub identity_residual: f64,
    /// `max |Π Π v − Π v| / max |Π v|` over trial fields.
    pub idempotence_residual: f64,
    /// Largest relative error of `⟨div Π v, Q⟩ = ⟨div v, Q⟩`.
    pub divergence_residual: f64,
    /// Largest local stability ratio over cells and trial fields.
    pub local_stability: f64,
}

impl ProjectorPair {
    pub fn new(pair: &SpacePair) -> Result<Self> {
        let tri = pair.mesh();
        let dim = tri.dim();
        let le = local_edges(dim);
        let mut edge_site = vec![EdgeSite { cell: 0, local: [0, 0] }; tri.num_edges()];
        let mut seen = vec![false; tri.num_edges()];
        for c in 0..tri.num_cells() {
            let vs = tri.cell(c);
            for (k, &e) in tri.cell_edges(c).iter().enumerate() {
                if seen[e] {
                    continue;
                }
                seen[e] = true;
                let [a, b] = le[k];
                let local = if vs[a] == tri.edges()[e][0] { [a, b] } else { [b, a] };
                edge_site[e] = EdgeSite { cell: c, local };
            }
        }
        let mut sz_edge: Vec<Option<(usize, bool)>> = vec![None; tri.num_vertices()];
        for (e, &[a, b]) in tri.edges().iter().enumerate() {
            for (v, second) in [(a, false), (b, true)] {
                if sz_edge[v].is_none() {
                    sz_edge[v] = Some((e, second));
                }
            }
        }
        let rule = SimplexRule::for_degree(dim, if dim == 2 { 12 } else { 8 });
        let pressure_lu = if pair.pressure_space() == PressureSpace::P1Continuous {
            Some(SparseLu::new(&pair.pressure_mass(&rule))?)
        } else {
            None
        };
        let th = if pair.kind() == PairKind::TaylorHood {
            let r = pair.default_rule();
            let gram = pair.velocity_gram(&r);
            let b = pair.divergence_matrix(&r);
            let solver = ConstrainedSolver::new(&gram, &b, &pair.pressure_integrals())?;
            Some((solver, pair.num_pressure()))
        } else {
            None
        };
        Ok(Self {
            rule,
            edge_site,
            sz_edge,
            pressure_lu,
            th,
        })
    }

    /// Π applied to a field evaluable cell-wise.
    pub fn project_velocity(&self, pair: &SpacePair, v: &CellField<'_>) -> Result<Vec<f64>> {
        let tri = pair.mesh();
        let dim = tri.dim();
        let mut u = vec![0.0; pair.num_velocity()];
        let (s, w) = gauss_legendre(EDGE_POINTS);

        // Scott–Zhang vertex values
        let mut vertex_value = vec![ZERO3; tri.num_vertices()];
        for vtx in 0..tri.num_vertices() {
            if tri.is_boundary_vertex(vtx) {
                continue;
            }
            let (e, second) = self.sz_edge[vtx].expect("every vertex has an edge");
            let site = self.edge_site[e];
            let mut val = ZERO3;
            for q in 0..s.len() {
                let sv = v(site.cell, &site.bary(s[q]));
                let dist = if second { 1.0 - s[q] } else { s[q] };
                for i in 0..dim {
                    val[i] += w[q] * p2_dual(dist) * sv[i];
                }
            }
            vertex_value[vtx] = val;
            for i in 0..dim {
                if let Some(d) = pair.vertex_dof(vtx, i) {
                    u[d] = val[i];
                }
            }
        }

        let quadratic_traces = pair.kind() != PairKind::Mini;
        if quadratic_traces {
            for (e, &[a, b]) in tri.edges().iter().enumerate() {
                if tri.is_boundary_edge(e) {
                    continue;
                }
                let site = self.edge_site[e];
                let mut mean = ZERO3;
                for q in 0..s.len() {
                    let sv = v(site.cell, &site.bary(s[q]));
                    for i in 0..dim {
                        mean[i] += w[q] * sv[i];
                    }
                }
                for i in 0..dim {
                    let value = if pair.kind() == PairKind::GuzmanNeilan {
                        mean[i]
                    } else {
                        // Simpson: mean = (v_a + 4 v_mid + v_b) / 6
                        (6.0 * mean[i] - vertex_value[a][i] - vertex_value[b][i]) / 4.0
                    };
                    if let Some(d) = pair.edge_dof(e, i) {
                        u[d] = value;
                    }
                }
            }
        }

        match pair.kind() {
            PairKind::Mini => self.mini_bubbles(pair, v, &mut u),
            PairKind::CrouzeixRaviartConforming => self.cr_bubbles(pair, v, &mut u),
            PairKind::TaylorHood => self.th_correction(pair, v, &mut u)?,
            PairKind::P2P0 | PairKind::GuzmanNeilan => {}
        }
        Ok(u)
    }

    /// Projection of an analytic field.
    pub fn project_field(&self, pair: &SpacePair, f: &dyn VectorField) -> Result<Vec<f64>> {
        let tri = pair.mesh();
        self.project_velocity(pair, &|c, lam| f.value(&tri.point(c, lam)))
    }

    fn bubble_integral(&self, pair: &SpacePair, c: usize) -> f64 {
        // bubble scaled to 1 at the barycenter: (d+1)^{d+1} d! / (2d+1)!
        let d = pair.dim();
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let nv = (d + 1) as f64;
        nv.powi(d as i32 + 1) * fact(d) / fact(2 * d + 1) * pair.mesh().measure(c)
    }

    fn bubble_index(pair: &SpacePair, space: ScalarSpace) -> usize {
        space.len(pair.dim()) - 1
    }

    /// Bubble coefficients enforcing `∫_E (v − Π v) = 0`.
    fn mini_bubbles(&self, pair: &SpacePair, v: &CellField<'_>, u: &mut [f64]) {
        let tri = pair.mesh();
        let dim = pair.dim();
        let ns = ScalarSpace::P1Bubble.len(dim);
        let bi = Self::bubble_index(pair, ScalarSpace::P1Bubble);
        let coeffs = super::per_cell(tri.num_cells(), |c| {
            let mut diff = ZERO3;
            for q in 0..self.rule.len() {
                let lam = &self.rule.bary[q];
                let target = v(c, lam);
                let (cur, _) = pair.velocity_at(u, c, lam);
                for i in 0..dim {
                    diff[i] += self.rule.weights[q] * tri.measure(c) * (target[i] - cur[i]);
                }
            }
            diff.map(|x| x / self.bubble_integral(pair, c))
        });
        for (c, coef) in coeffs.iter().enumerate() {
            for i in 0..dim {
                let d = pair.velocity_dofs(c)[i * ns + bi];
                if d != CONSTRAINED {
                    u[d] = coef[i];
                }
            }
        }
    }

    /// Bubble coefficients enforcing the first moments of the divergence:
    /// `c_i = −∫_E div w (x_i − x̄_i) / ∫_E b` with `w = v − Π₂ v`, evaluated
    /// as `∫_E div w q = −∫_E w·∇q + ∫_{∂E} (w·n) q`.
    fn cr_bubbles(&self, pair: &SpacePair, v: &CellField<'_>, u: &mut [f64]) {
        let tri = pair.mesh();
        let dim = pair.dim();
        let ns = ScalarSpace::P2Bubble.len(dim);
        let bi = Self::bubble_index(pair, ScalarSpace::P2Bubble);
        let (s, w) = gauss_legendre(EDGE_POINTS);
        let coeffs = super::per_cell(tri.num_cells(), |c| {
            let xbar = tri.barycenter(c);
            let mut moment = ZERO3;
            for q in 0..self.rule.len() {
                let lam = &self.rule.bary[q];
                let target = v(c, lam);
                let (cur, _) = pair.velocity_at(u, c, lam);
                for i in 0..dim {
                    moment[i] -= self.rule.weights[q] * tri.measure(c) * (target[i] - cur[i]);
                }
            }
            let glam = tri.map(c).bary_gradients(dim);
            for e in 0..3 {
                // local edge e is opposite vertex e; outward normal −∇λ_e/|∇λ_e|
                let g = glam[e];
                let gn = norm(&g);
                let n = g.map(|x| -x / gn);
                let [a, b] = local_edges(dim)[e];
                let len = norm(&crate::linalg::sub(tri.vertex(tri.cell(c)[a]), tri.vertex(tri.cell(c)[b])));
                for q in 0..s.len() {
                    let lam = edge_point(dim, e, s[q]);
                    let target = v(c, &lam);
                    let (cur, _) = pair.velocity_at(u, c, &lam);
                    let wn: f64 = (0..dim).map(|k| (target[k] - cur[k]) * n[k]).sum();
                    let x = tri.point(c, &lam);
                    for i in 0..dim {
                        moment[i] += w[q] * len * wn * (x[i] - xbar[i]);
                    }
                }
            }
            moment.map(|m| -m / self.bubble_integral(pair, c))
        });
        for (c, coef) in coeffs.iter().enumerate() {
            for i in 0..dim {
                let d = pair.velocity_dofs(c)[i * ns + bi];
                if d != CONSTRAINED {
                    u[d] = coef[i];
                }
            }
        }
    }

    /// Minimal H¹-norm correction restoring `⟨div(v − Π v), q⟩ = 0` for all
    /// continuous P1 pressures.
    fn th_correction(&self, pair: &SpacePair, v: &CellField<'_>, u: &mut [f64]) -> Result<()> {
        let tri = pair.mesh();
        let dim = pair.dim();
        let (solver, np) = self.th.as_ref().expect("Taylor–Hood solver");
        let locals = super::per_cell(tri.num_cells(), |c| {
            let mut diff = ZERO3;
            for q in 0..self.rule.len() {
                let lam = &self.rule.bary[q];
                let target = v(c, lam);
                let (cur, _) = pair.velocity_at(u, c, lam);
                for i in 0..dim {
                    diff[i] += self.rule.weights[q] * tri.measure(c) * (target[i] - cur[i]);
                }
            }
            diff
        });
        let mut g = vec![0.0; *np];
        for (c, diff) in locals.iter().enumerate() {
            let glam = tri.map(c).bary_gradients(dim);
            for (j, &p) in pair.pressure_dofs(c).iter().enumerate() {
                g[p] -= (0..dim).map(|i| glam[j][i] * diff[i]).sum::<f64>();
            }
        }
        let (w, _) = solver.solve(&vec![0.0; u.len()], &g)?;
        for (ui, wi) in u.iter_mut().zip(w) {
            *ui += wi;
        }
        Ok(())
    }

    /// L²-projection onto the pressure space (cell-wise for discontinuous
    /// spaces).
    pub fn project_pressure(&self, pair: &SpacePair, q: &CellScalar<'_>) -> Result<Vec<f64>> {
        let tri = pair.mesh();
        let dim = pair.dim();
        let np = pair.pressure_local();
        let mut out = vec![0.0; pair.num_pressure()];
        match pair.pressure_space() {
            PressureSpace::P0 | PressureSpace::P1Discontinuous => {
                let locals = super::per_cell(tri.num_cells(), |c| {
                    let mut m = vec![0.0; np * np];
                    let mut rhs = vec![0.0; np];
                    let mut pv = [0.0; 4];
                    for k in 0..self.rule.len() {
                        let lam = &self.rule.bary[k];
                        let wq = self.rule.weights[k];
                        pair.eval_pressure(lam, &mut pv);
                        let val = q(c, lam);
                        for a in 0..np {
                            rhs[a] += wq * val * pv[a];
                            for b in 0..np {
                                m[a * np + b] += wq * pv[a] * pv[b];
                            }
                        }
                    }
                    dense_solve(&mut m, np, &mut rhs, 1).expect("local mass matrix is regular");
                    rhs
                });
                for (c, vals) in locals.into_iter().enumerate() {
                    for (a, &d) in pair.pressure_dofs(c).iter().enumerate() {
                        out[d] = vals[a];
                    }
                }
            }
            PressureSpace::P1Continuous => {
                let mut pv = [0.0; 4];
                for c in 0..tri.num_cells() {
                    for k in 0..self.rule.len() {
                        let lam = &self.rule.bary[k];
                        let wq = self.rule.weights[k] * tri.measure(c);
                        pair.eval_pressure(lam, &mut pv);
                        let val = q(c, lam);
                        for (a, &d) in pair.pressure_dofs(c).iter().enumerate().take(dim + 1) {
                            out[d] += wq * val * pv[a];
                        }
                    }
                }
                out = self.pressure_lu.as_ref().expect("pressure mass factorization").solve(&out)?;
            }
        }
        Ok(out)
    }

    /// Projection identity, idempotence, divergence preservation and local
    /// stability over the given trial fields (which must vanish on ∂Ω).
    pub fn check(&self, pair: &SpacePair, fields: &[&dyn VectorField], seed: u64) -> Result<StabilityReport> {
        let tri = pair.mesh();
        let dim = pair.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let member: Vec<f64> = (0..pair.num_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = self.project_velocity(pair, &|c, lam| pair.velocity_at(&member, c, lam).0)?;
        let identity_residual = max_diff(&back, &member) / vec_max_abs(&member).max(f64::MIN_POSITIVE);

        let rule = &self.rule;
        let b = pair.divergence_matrix(rule);
        let mut idem: f64 = 0.0;
        let mut div_res: f64 = 0.0;
        let mut local: f64 = 0.0;
        for f in fields {
            let pv = self.project_field(pair, *f)?;
            let ppv = self.project_velocity(pair, &|c, lam| pair.velocity_at(&pv, c, lam).0)?;
            idem = idem.max(max_diff(&ppv, &pv) / vec_max_abs(&pv).max(f64::MIN_POSITIVE));
            div_res = div_res.max(divergence_residual(pair, rule, &b, *f, &pv));
            local = local.max(local_stability(pair, rule, *f, &pv));
        }
        let _ = (tri, dim);
        Ok(StabilityReport {
            pair: pair.kind().name().to_string(),
            identity_residual,
            idempotence_residual: idem,
            divergence_residual: div_res,
            local_stability: local,
        })
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max_q |⟨div Πv − div v, ψ_q⟩| / ∫ |∇v| |ψ_q|`.
pub(crate) fn divergence_residual(
    pair: &SpacePair,
    rule: &SimplexRule,
    b: &CsrMatrix,
    f: &dyn VectorField,
    pv: &[f64],
) -> f64 {
    let tri = pair.mesh();
    let mut exact = vec![0.0; pair.num_pressure()];
    let mut scale = vec![0.0; pair.num_pressure()];
    let mut vals = [0.0; 4];
    for c in 0..tri.num_cells() {
        for q in 0..rule.len() {
            let lam = &rule.bary[q];
            let x = tri.point(c, lam);
            let g = f.gradient(&x);
            let div: f64 = (0..pair.dim()).map(|i| g[i][i]).sum();
            let wq = rule.weights[q] * tri.measure(c);
            pair.eval_pressure(lam, &mut vals);
            for (a, &d) in pair.pressure_dofs(c).iter().enumerate() {
                exact[d] += wq * div * vals[a];
                scale[d] += wq * frob(&g) * vals[a].abs();
            }
        }
    }
    let disc = b.mul_vec(pv);
    let total_scale = scale.iter().cloned().fold(0.0, f64::max);
    disc.iter()
        .zip(&exact)
        .zip(&scale)
        .map(|((d, e), s)| (d - e).abs() / s.max(1e-3 * total_scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Largest ratio `(⨍_E |Πv| + h_E ⨍_E |∇Πv|) / (⨍_{ω_E} |v| + h_E ⨍_{ω_E} |∇v|)`.
fn local_stability(pair: &SpacePair, rule: &SimplexRule, f: &dyn VectorField, pv: &[f64]) -> f64 {
    let tri = pair.mesh();
    let n = tri.num_cells();
    let cell_terms: Vec<(f64, f64, f64, f64)> = super::per_cell(n, |c| {
        let (mut a, mut ga, mut b, mut gb) = (0.0, 0.0, 0.0, 0.0);
        for q in 0..rule.len() {
            let lam = &rule.bary[q];
            let wq = rule.weights[q] * tri.measure(c);
            let (v, g) = pair.velocity_at(pv, c, lam);
            let x = tri.point(c, lam);
            a += wq * norm(&v);
            ga += wq * frob(&g);
            b += wq * norm(&f.value(&x));
            gb += wq * frob(&f.gradient(&x));
        }
        (a, ga, b, gb)
    });
    let mut worst: f64 = 0.0;
    let global: f64 = cell_terms.iter().map(|t| t.2 + t.3).sum();
    for c in 0..n {
        let h = tri.h(c);
        let m = tri.measure(c);
        let lhs = (cell_terms[c].0 + h * cell_terms[c].1) / m;
        let patch = tri.patch_of(c).expect("valid cell");
        let (mut b, mut gb) = (0.0, 0.0);
        for &p in &patch.members {
            b += cell_terms[p].2;
            gb += cell_terms[p].3;
        }
        let rhs = (b + h * gb) / patch.measure;
        if rhs > 1e-8 * global / tri.total_measure() {
            worst = worst.max(lhs / rhs);
        }
    }
    worst
}
