//! Choice of truncation levels `λ_{n,j} ∈ [2^{2^j}, 2^{2^{j+1}})` for a
//! sequence of discrete fields.

use serde::Serialize;

use super::maximal::MaximalField;
use super::truncate::discrete_level_region;
use crate::elements::SpacePair;
use crate::error::{Error, Result};
use crate::linalg::frob;

/// One discrete field of the sequence with its gradient maximal function.
pub struct LevelInput<'a> {
    pub pair: &'a SpacePair,
    pub u: &'a [f64],
    pub maximal: &'a MaximalField,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LevelChoice {
    pub n: usize,
    pub j: u32,
    pub lambda: f64,
    /// `|{M > κλ}|`.
    pub exceedance: f64,
    /// `|Ωⁿ_λ|`.
    pub region_measure: f64,
    /// `‖λ χ_{Ωⁿ_λ}‖_s 2^{j/s} / ‖∇Eⁿ‖_s`.
    pub ratio: f64,
}

/// `‖∇u‖_s` by the pair's default quadrature.
pub fn gradient_norm(pair: &SpacePair, u: &[f64], s: f64) -> f64 {
    let tri = pair.mesh();
    let rule = pair.default_rule();
    let mut acc = 0.0;
    for c in 0..tri.num_cells() {
        let m = tri.measure(c);
        for (lam, &w) in rule.bary.iter().zip(&rule.weights) {
            acc += w * m * frob(&pair.velocity_at(u, c, lam).1).powf(s);
        }
    }
    acc.powf(1.0 / s)
}

/// For every field and `j = 1..=j_max`, picks `λ = 2^m`,
/// `m ∈ [2^j, 2^{j+1})`, minimising `λ^s |{M > κλ}|` (ties go to the
/// smallest `λ`).
pub fn select_levels(inputs: &[LevelInput<'_>], s: f64, j_max: u32, kappa: f64) -> Result<Vec<LevelChoice>> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::invalid(format!("exponent s = {s} must be in [1, ∞)")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::invalid(format!("κ = {kappa} must be in (0, 1]")));
    }
    if j_max > 5 {
        return Err(Error::invalid("j_max above 5 overflows the level range"));
    }
    let mut out = Vec::new();
    for (n, inp) in inputs.iter().enumerate() {
        if inp.u.len() != inp.pair.num_velocity() {
            return Err(Error::invalid(format!("field {n} has the wrong length")));
        }
        let gn = gradient_norm(inp.pair, inp.u, s);
        for j in 1..=j_max {
            let mut best: Option<(f64, f64, f64)> = None;
            for m in (1u32 << j)..(1u32 << (j + 1)) {
                let lambda = 2f64.powi(m as i32);
                let e = inp.maximal.exceedance_measure(kappa * lambda);
                let cost = lambda.powf(s) * e;
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, lambda, e));
                }
            }
            let (_, lambda, exceedance) = best.expect("non-empty candidate range");
            let level = inp.maximal.level_set(lambda)?;
            let tri = inp.pair.mesh();
            let (_, omega) = discrete_level_region(tri, &level);
            let region_measure: f64 = (0..tri.num_cells()).filter(|&c| omega[c]).map(|c| tri.measure(c)).sum();
            let num = lambda * region_measure.powf(1.0 / s) * 2f64.powf(j as f64 / s);
            let ratio = if gn > 0.0 { num / gn } else if num == 0.0 { 0.0 } else { f64::INFINITY };
            out.push(LevelChoice {
                n,
                j,
                lambda,
                exceedance,
                region_measure,
                ratio,
            });
        }
    }
    Ok(out)
}
