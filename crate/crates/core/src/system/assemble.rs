//! Residual and Jacobian of the discrete momentum/continuity system.
//!
//! Unknowns are stacked as `x = [U, P, s]`, where the scalar `s` multiplies
//! the pressure-mean row so that the saddle-point matrix stays symmetric:
//!
//! ```text
//! R_U = ∫ S(DU):DV + B[U, U, V] − ⟨div V, P⟩ − ⟨f, V⟩
//! R_P = −⟨div U, Q⟩ + s ∫Q
//! R_s = ∫P
//! ```

use super::forms::Convection;
use crate::constitutive::StressModel;
use crate::elements::{per_cell, SpacePair, CONSTRAINED, MAX_LOCAL};
use crate::error::{Error, Result};
use crate::linalg::{ddot, dot, frob, mat_vec, sym, CsrMatrix, Mat3, TripletBuilder, Vec3, ZERO3, ZERO33};
use crate::quadrature::SimplexRule;

/// Body force evaluated at physical points.
pub type Force<'a> = dyn Fn(&Vec3) -> Vec3 + Sync + 'a;

/// Shear rates below this are treated as this value in the stress tangent.
pub(crate) const SHEAR_FLOOR: f64 = 1e-8;

/// How the stress and the convection are linearized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linearization {
    /// Exact derivative of the residual.
    Newton,
    /// Secant viscosity `Γ(|DU|)/|DU|` with convection lagged in the
    /// transporting velocity.
    Picard,
    /// Fixed viscosity `g0` (stress `g0·D`), no convection: a Stokes solve.
    Stokes(f64),
}

/// The fixed (law-independent) parts of the discrete problem.
pub struct AssembledOperator<'a> {
    pair: &'a SpacePair,
    rule: SimplexRule,
    b: CsrMatrix,
    mean: Vec<f64>,
    load: Vec<f64>,
    convection: Convection,
}

impl<'a> AssembledOperator<'a> {
    pub fn new(
        pair: &'a SpacePair,
        force: &Force<'_>,
        convection: Convection,
        rule: Option<SimplexRule>,
    ) -> Result<Self> {
        let rule = rule.unwrap_or_else(|| pair.default_rule());
        if rule.dim != pair.dim() {
            return Err(Error::invalid("quadrature rule dimension does not match the mesh"));
        }
        if convection == Convection::Divfree && !pair.kind().divergence_free() {
            log::warn!(
                "unmodified convection form used with `{}`, whose discrete velocities are not solenoidal",
                pair.kind().name()
            );
        }
        let b = pair.divergence_matrix(&rule);
        let mean = pair.pressure_integrals();
        let load = load_vector(pair, force, &rule);
        Ok(Self {
            pair,
            rule,
            b,
            mean,
            load,
            convection,
        })
    }

    pub fn pair(&self) -> &SpacePair {
        self.pair
    }

    pub fn rule(&self) -> &SimplexRule {
        &self.rule
    }

    pub fn convection(&self) -> Convection {
        self.convection
    }

    /// Divergence matrix `B[q][v] = ⟨div φ_v, ψ_q⟩`.
    pub fn divergence(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn pressure_integrals(&self) -> &[f64] {
        &self.mean
    }

    /// `⟨f, φ_v⟩`.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn num_unknowns(&self) -> usize {
        self.pair.num_velocity() + self.pair.num_pressure() + 1
    }

    /// `∫ S(DU):DV + B[U, U, V]` for every basis function `V`.
    pub fn nonlinear_part(&self, model: &StressModel, u: &[f64]) -> Vec<f64> {
        self.cell_loop(model, u, None).0
    }

    /// Full residual at `x = [U, P, s]`.
    pub fn residual(&self, model: &StressModel, x: &[f64]) -> Vec<f64> {
        let a = self.nonlinear_part(model, &x[..self.pair.num_velocity()]);
        self.residual_from(&a, x)
    }

    /// Residual and Jacobian (or its Picard/Stokes surrogate) at `x`.
    pub fn linearize(&self, model: &StressModel, x: &[f64], lin: Linearization) -> (Vec<f64>, CsrMatrix) {
        let (nv, np) = (self.pair.num_velocity(), self.pair.num_pressure());
        let (a, k) = self.cell_loop(model, &x[..nv], Some(lin));
        let k = k.expect("matrix requested");
        let mut r = self.residual_from(&a, x);
        if let Linearization::Stokes(_) = lin {
            // the Stokes surrogate is used for a fresh solve, not a correction
            r.iter_mut().for_each(|v| *v = 0.0);
        }
        let n = nv + np + 1;
        let mut t = TripletBuilder::new(n, n);
        t.push_block(&k, 0, 0, 1.0);
        t.push_block_transposed(&self.b, 0, nv, -1.0);
        t.push_block(&self.b, nv, 0, -1.0);
        for (q, &m) in self.mean.iter().enumerate() {
            t.push(nv + q, nv + np, m);
            t.push(nv + np, nv + q, m);
        }
        (r, t.into_csr())
    }

    fn residual_from(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        let (nv, np) = (self.pair.num_velocity(), self.pair.num_pressure());
        let p = &x[nv..nv + np];
        let mut r = vec![0.0; nv + np + 1];
        let btp = self.b.mul_vec_transposed(p);
        for i in 0..nv {
            r[i] = a[i] - btp[i] - self.load[i];
        }
        let bu = self.b.mul_vec(&x[..nv]);
        for q in 0..np {
            r[nv + q] = -bu[q] + x[nv + np] * self.mean[q];
        }
        r[nv + np] = crate::linalg::vec_dot(&self.mean, p);
        r
    }

    /// Cell loop for the stress and convection terms. Returns the vector
    /// `∫ S(DU):DV + B[U, U, V]` and, if requested, its linearization.
    fn cell_loop(&self, model: &StressModel, u: &[f64], lin: Option<Linearization>) -> (Vec<f64>, Option<CsrMatrix>) {
        let pair = self.pair;
        let tri = pair.mesh();
        let nl = pair.velocity_local();
        let rule = &self.rule;
        let conv = match lin {
            Some(Linearization::Stokes(_)) => Convection::None,
            _ => self.convection,
        };
        let floor = model.profile(SHEAR_FLOOR).0 / SHEAR_FLOOR;
        let locals = per_cell(tri.num_cells(), |c| {
            let dofs = pair.velocity_dofs(c);
            let mut coef = [0.0; MAX_LOCAL];
            for a in 0..nl {
                if dofs[a] != CONSTRAINED {
                    coef[a] = u[dofs[a]];
                }
            }
            let mut vals = [ZERO3; MAX_LOCAL];
            let mut grads = [ZERO33; MAX_LOCAL];
            let mut res = vec![0.0; nl];
            let mut mat = if lin.is_some() { vec![0.0; nl * nl] } else { Vec::new() };
            for q in 0..rule.len() {
                let w = rule.weights[q] * tri.measure(c);
                pair.eval_velocity(c, &rule.bary[q], &mut vals, &mut grads);
                let mut uv = ZERO3;
                let mut ug = ZERO33;
                for a in 0..nl {
                    if coef[a] == 0.0 {
                        continue;
                    }
                    for i in 0..3 {
                        uv[i] += coef[a] * vals[a][i];
                        for j in 0..3 {
                            ug[i][j] += coef[a] * grads[a][i][j];
                        }
                    }
                }
                let d = sym(&ug);
                let t = frob(&d);
                let (gam, dgam) = model.profile(t);
                let stress_coeff = if t > 0.0 { gam / t } else { 0.0 };
                // (U·∇)U
                let adv_u = mat_vec(&ug, &uv);
                for a in 0..nl {
                    let mut r = stress_coeff * ddot(&d, &grads[a]);
                    r += match conv {
                        Convection::None => 0.0,
                        Convection::Skew => 0.5 * (dot(&vals[a], &adv_u) - dot(&uv, &mat_vec(&grads[a], &uv))),
                        Convection::Divfree => -dot(&uv, &mat_vec(&grads[a], &uv)),
                    };
                    res[a] += w * r;
                }
                let Some(lin) = lin else { continue };
                let tangent = StressTangent::new(lin, &d, t, gam, dgam, floor);
                let mut dphi = [ZERO33; MAX_LOCAL];
                for a in 0..nl {
                    dphi[a] = sym(&grads[a]);
                }
                // U·∇φ for every basis function
                let mut adv = [ZERO3; MAX_LOCAL];
                for a in 0..nl {
                    adv[a] = mat_vec(&grads[a], &uv);
                }
                for b in 0..nl {
                    let ds = tangent.apply(&dphi[b]);
                    // (φ_b·∇)U
                    let adv_b = mat_vec(&ug, &vals[b]);
                    for a in 0..nl {
                        let mut v = ddot(&ds, &dphi[a]);
                        v += match (conv, lin) {
                            (Convection::None, _) => 0.0,
                            (Convection::Skew, Linearization::Newton) => {
                                0.5 * (dot(&vals[a], &adv_b) + dot(&vals[a], &adv[b])
                                    - dot(&vals[b], &adv[a])
                                    - dot(&uv, &mat_vec(&grads[a], &vals[b])))
                            }
                            (Convection::Skew, _) => 0.5 * (dot(&vals[a], &adv[b]) - dot(&vals[b], &adv[a])),
                            (Convection::Divfree, Linearization::Newton) => {
                                -dot(&vals[b], &adv[a]) - dot(&uv, &mat_vec(&grads[a], &vals[b]))
                            }
                            (Convection::Divfree, _) => -dot(&vals[b], &adv[a]),
                        };
                        mat[a * nl + b] += w * v;
                    }
                }
            }
            (res, mat)
        });
        let nv = pair.num_velocity();
        let mut out = vec![0.0; nv];
        let mut t = lin.map(|_| TripletBuilder::new(nv, nv));
        for (c, (res, mat)) in locals.into_iter().enumerate() {
            let dofs = pair.velocity_dofs(c);
            for a in 0..nl {
                if dofs[a] == CONSTRAINED {
                    continue;
                }
                out[dofs[a]] += res[a];
                if let Some(t) = t.as_mut() {
                    for b in 0..nl {
                        if dofs[b] != CONSTRAINED {
                            t.push(dofs[a], dofs[b], mat[a * nl + b]);
                        }
                    }
                }
            }
        }
        (out, t.map(TripletBuilder::into_csr))
    }
}

/// `dS[E] = G E + (Γ′ − G)(D:E)/t² D` with `G = Γ/t` (tangent), or `G E`
/// alone (secant / fixed viscosity).
struct StressTangent {
    g: f64,
    rank_one: f64,
    d: Mat3,
}

impl StressTangent {
    /// `floor` is `Γ(t₀)/t₀` at the shear floor `t₀`, used where `|D|` is
    /// too small for the tangent to be evaluated reliably.
    fn new(lin: Linearization, d: &Mat3, t: f64, gam: f64, dgam: f64, floor: f64) -> Self {
        let (g, rank_one) = match lin {
            Linearization::Stokes(g0) => (g0, 0.0),
            _ if t < SHEAR_FLOOR => (floor, 0.0),
            Linearization::Newton => {
                let g = gam / t;
                (g, (dgam - g) / (t * t))
            }
            Linearization::Picard => (gam / t, 0.0),
        };
        Self { g, rank_one, d: *d }
    }

    fn apply(&self, e: &Mat3) -> Mat3 {
        let s = self.rank_one * ddot(&self.d, e);
        let mut out = ZERO33;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.g * e[i][j] + s * self.d[i][j];
            }
        }
        out
    }
}

/// `⟨f, φ_v⟩` for every free velocity DOF.
pub fn load_vector(pair: &SpacePair, force: &Force<'_>, rule: &SimplexRule) -> Vec<f64> {
    let tri = pair.mesh();
    let nl = pair.velocity_local();
    let locals = per_cell(tri.num_cells(), |c| {
        let mut vals = [ZERO3; MAX_LOCAL];
        let mut grads = [ZERO33; MAX_LOCAL];
        let mut out = vec![0.0; nl];
        for q in 0..rule.len() {
            let w = rule.weights[q] * tri.measure(c);
            let x = tri.point(c, &rule.bary[q]);
            let f = force(&x);
            pair.eval_velocity(c, &rule.bary[q], &mut vals, &mut grads);
            for a in 0..nl {
                out[a] += w * dot(&f, &vals[a]);
            }
        }
        out
    });
    let mut load = vec![0.0; pair.num_velocity()];
    for (c, l) in locals.into_iter().enumerate() {
        for (a, &d) in pair.velocity_dofs(c).iter().enumerate() {
            if d != CONSTRAINED {
                load[d] += l[a];
            }
        }
    }
    load
}

/// Momentum and continuity residuals of `(U, P)`:
/// `∫ S(DU):DV + B[U, U, V] − ⟨div V, P⟩ − ⟨f, V⟩` and `⟨div U, Q⟩`.
pub fn assemble_residual(
    pair: &SpacePair,
    model: &StressModel,
    u: &[f64],
    p: &[f64],
    force: &Force<'_>,
    convection: Convection,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != pair.num_velocity() || p.len() != pair.num_pressure() {
        return Err(Error::invalid(format!(
            "coefficient vectors of lengths ({}, {}) do not match the pair ({}, {})",
            u.len(),
            p.len(),
            pair.num_velocity(),
            pair.num_pressure()
        )));
    }
    let op = AssembledOperator::new(pair, force, convection, None)?;
    let a = op.nonlinear_part(model, u);
    let btp = op.b.mul_vec_transposed(p);
    let momentum = (0..a.len()).map(|i| a[i] - btp[i] - op.load[i]).collect();
    Ok((momentum, op.b.mul_vec(u)))
}
