//! Error norms, a-priori norms and the `aₙ` monotonicity-gap diagnostic.

use serde::Serialize;

use crate::constitutive::{GraphLaw, StressModel};
use crate::elements::{per_cell, SpacePair, VectorField};
use crate::linalg::{ddot, frob, mat_sub, norm, sub, sym, Vec3};
use crate::quadrature::SimplexRule;

/// Pressure integrability exponent `r̃ = min{r′, r*/2}` with the Sobolev
/// exponent `r* = dr/(d − r)` for `r < d` and `∞` otherwise.
pub fn r_tilde(r: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let r_conj = r / (r - 1.0);
    let r_star = if r < d { d * r / (d - r) } else { f64::INFINITY };
    r_conj.min(r_star / 2.0)
}

/// Quadrature used by the diagnostics: two degrees above the solver's.
pub fn diagnostic_rule(pair: &SpacePair) -> SimplexRule {
    let base = pair.default_rule();
    let finer = SimplexRule::for_degree(pair.dim(), 2 * pair.velocity_degree() + 4);
    if finer.len() > base.len() {
        finer
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ErrorNorms {
    /// `‖u − U‖_{1,r} = (‖u − U‖_r^r + ‖∇(u − U)‖_r^r)^{1/r}`.
    pub velocity_w1r: f64,
    /// `‖u − U‖_{1,2}`.
    pub velocity_h1: f64,
    /// `‖p − P‖_{r̃}` after removing the mean of `p − P`.
    pub pressure: f64,
}

/// Errors of `(U, P)` against an exact solution.
pub fn solution_errors(
    pair: &SpacePair,
    u: &[f64],
    p: &[f64],
    exact_u: &dyn VectorField,
    exact_p: &(dyn Fn(&Vec3) -> f64 + Sync),
    r: f64,
    r_tilde: f64,
) -> ErrorNorms {
    let tri = pair.mesh();
    let rule = diagnostic_rule(pair);
    // per cell: [∫|e|^r, ∫|∇e|^r, ∫|e|², ∫|∇e|², ∫(p−P), ∫1]
    let parts = per_cell(tri.num_cells(), |c| {
        let mut acc = [0.0; 6];
        for q in 0..rule.len() {
            let w = rule.weights[q] * tri.measure(c);
            let x = tri.point(c, &rule.bary[q]);
            let (uv, ug) = pair.velocity_at(u, c, &rule.bary[q]);
            let e = norm(&sub(&exact_u.value(&x), &uv));
            let ge = frob(&mat_sub(&exact_u.gradient(&x), &ug));
            acc[0] += w * e.powf(r);
            acc[1] += w * ge.powf(r);
            acc[2] += w * e * e;
            acc[3] += w * ge * ge;
            acc[4] += w * (exact_p(&x) - pair.pressure_at(p, c, &rule.bary[q]));
            acc[5] += w;
        }
        acc
    });
    let mut tot = [0.0; 6];
    for a in &parts {
        for i in 0..6 {
            tot[i] += a[i];
        }
    }
    let shift = tot[4] / tot[5];
    let perr: f64 = per_cell(tri.num_cells(), |c| {
        let mut acc = 0.0;
        for q in 0..rule.len() {
            let x = tri.point(c, &rule.bary[q]);
            let e = exact_p(&x) - pair.pressure_at(p, c, &rule.bary[q]) - shift;
            acc += rule.weights[q] * tri.measure(c) * e.abs().powf(r_tilde);
        }
        acc
    })
    .iter()
    .sum();
    ErrorNorms {
        velocity_w1r: (tot[0] + tot[1]).powf(1.0 / r),
        velocity_h1: (tot[2] + tot[3]).sqrt(),
        pressure: perr.powf(1.0 / r_tilde),
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SolutionNorms {
    /// `‖U‖_{1,r}`.
    pub velocity: f64,
    /// `‖S(DU)‖_{r′}`.
    pub stress: f64,
    /// `‖DU‖₂ / ‖U‖_{1,2}` (Korn ratio statistic).
    pub korn_ratio: f64,
}

/// The quantities bounded uniformly by the a-priori estimate.
pub fn solution_norms(pair: &SpacePair, model: &StressModel, u: &[f64]) -> SolutionNorms {
    let tri = pair.mesh();
    let rule = diagnostic_rule(pair);
    let r = model.law().r();
    let rc = model.law().r_conj();
    let parts = per_cell(tri.num_cells(), |c| {
        let mut acc = [0.0; 5];
        for q in 0..rule.len() {
            let w = rule.weights[q] * tri.measure(c);
            let (uv, ug) = pair.velocity_at(u, c, &rule.bary[q]);
            let d = sym(&ug);
            let (v, g) = (norm(&uv), frob(&ug));
            acc[0] += w * (v.powf(r) + g.powf(r));
            acc[1] += w * frob(&model.stress(&d)).powf(rc);
            acc[2] += w * frob(&d).powi(2);
            acc[3] += w * (v * v + g * g);
        }
        acc
    });
    let mut tot = [0.0; 5];
    for a in &parts {
        for i in 0..5 {
            tot[i] += a[i];
        }
    }
    SolutionNorms {
        velocity: tot[0].powf(1.0 / r),
        stress: tot[1].powf(1.0 / rc),
        korn_ratio: if tot[3] > 0.0 { (tot[2] / tot[3]).sqrt() } else { 0.0 },
    }
}

/// `aₙ = (Sⁿ(DU) − S*(Du)) : (DU − Du)` sampled at quadrature points.
#[derive(Debug, Clone, Serialize)]
pub struct AnReport {
    /// Per quadrature point: (value, weight·|E|).
    pub samples: Vec<(f64, f64)>,
    /// `(ε, |{|aₙ| > ε}|)`.
    pub exceedance: Vec<(f64, f64)>,
    /// `(θ, ∫|aₙ|^θ)`.
    pub integrals: Vec<(f64, f64)>,
    pub min: f64,
    pub max: f64,
}

pub fn an_diagnostic(
    pair: &SpacePair,
    model: &StressModel,
    law: &GraphLaw,
    u: &[f64],
    exact_u: &dyn VectorField,
    eps: &[f64],
    thetas: &[f64],
) -> AnReport {
    let tri = pair.mesh();
    let rule = diagnostic_rule(pair);
    let parts = per_cell(tri.num_cells(), |c| {
        (0..rule.len())
            .map(|q| {
                let x = tri.point(c, &rule.bary[q]);
                let (_, ug) = pair.velocity_at(u, c, &rule.bary[q]);
                let dn = sym(&ug);
                let du = sym(&exact_u.gradient(&x));
                let a = ddot(&mat_sub(&model.stress(&dn), &law.stress(&du)), &mat_sub(&dn, &du));
                (a, rule.weights[q] * tri.measure(c))
            })
            .collect::<Vec<_>>()
    });
    let samples: Vec<(f64, f64)> = parts.into_iter().flatten().collect();
    let exceedance = eps
        .iter()
        .map(|&e| (e, samples.iter().filter(|s| s.0.abs() > e).map(|s| s.1).sum::<f64>() + 0.0))
        .collect();
    let integrals = thetas
        .iter()
        .map(|&t| (t, samples.iter().map(|s| s.1 * s.0.abs().powf(t)).sum()))
        .collect();
    let min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    AnReport {
        samples,
        exceedance,
        integrals,
        min,
        max,
    }
}
