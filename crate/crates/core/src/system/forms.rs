//! Convection trilinear forms.
//!
//! With `(w·∇)` meaning `Σ_j w_j ∂_j`:
//!
//! ```text
//! skew:     B[v, w, h] = ½∫ h·(v·∇)w − w·(v·∇)h
//! divfree:  B[v, w, h] = −∫ w·(v·∇)h
//! ```
//!
//! The two differ by `½∫ (div v)(w·h)`, which vanishes for solenoidal `v`.

use serde::{Deserialize, Serialize};

use crate::elements::SpacePair;
use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, trace};
use crate::quadrature::SimplexRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convection {
    /// Stokes-type problem, no convective term.
    #[default]
    None,
    /// Skew-symmetrized form; `B[v, v, v] = 0` for every discrete `v`.
    Skew,
    /// Unmodified form; only skew for exactly divergence-free velocities.
    Divfree,
}

impl Convection {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" | "stokes" => Ok(Convection::None),
            "skew" => Ok(Convection::Skew),
            "divfree" | "div-free" => Ok(Convection::Divfree),
            _ => Err(Error::invalid(format!("unknown convection form `{name}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convection::None => "none",
            Convection::Skew => "skew",
            Convection::Divfree => "divfree",
        }
    }
}

fn check_len(pair: &SpacePair, fields: &[&[f64]]) -> Result<()> {
    let n = pair.num_velocity();
    for f in fields {
        if f.len() != n {
            return Err(Error::invalid(format!(
                "coefficient vector of length {} does not match {n} velocity DOFs",
                f.len()
            )));
        }
    }
    Ok(())
}

/// Integrates `f(v, ∇v, w, ∇w, h, ∇h)` over the mesh.
fn integrate(
    pair: &SpacePair,
    v: &[f64],
    w: &[f64],
    h: &[f64],
    rule: &SimplexRule,
    f: impl Fn(&[[f64; 3]; 3], &[[[f64; 3]; 3]; 3]) -> f64 + Sync,
) -> f64 {
    let tri = pair.mesh();
    let parts = crate::elements::per_cell(tri.num_cells(), |c| {
        let mut acc = 0.0;
        for q in 0..rule.len() {
            let (vv, gv) = pair.velocity_at(v, c, &rule.bary[q]);
            let (wv, gw) = pair.velocity_at(w, c, &rule.bary[q]);
            let (hv, gh) = pair.velocity_at(h, c, &rule.bary[q]);
            acc += rule.weights[q] * f(&[vv, wv, hv], &[gv, gw, gh]);
        }
        acc * tri.measure(c)
    });
    parts.iter().sum()
}

/// Skew-symmetrized form `½∫ h·(v·∇)w − w·(v·∇)h`.
pub fn trilinear_skew(pair: &SpacePair, v: &[f64], w: &[f64], h: &[f64]) -> Result<f64> {
    check_len(pair, &[v, w, h])?;
    let rule = pair.default_rule();
    Ok(integrate(pair, v, w, h, &rule, |val, grad| {
        0.5 * (dot(&val[2], &mat_vec(&grad[1], &val[0])) - dot(&val[1], &mat_vec(&grad[2], &val[0])))
    }))
}

/// Unmodified form `−∫ w·(v·∇)h`.
pub fn trilinear_divfree(pair: &SpacePair, v: &[f64], w: &[f64], h: &[f64]) -> Result<f64> {
    check_len(pair, &[v, w, h])?;
    if !pair.kind().divergence_free() {
        log::warn!(
            "unmodified convection form used with `{}`, whose discrete velocities are not solenoidal",
            pair.kind().name()
        );
    }
    let rule = pair.default_rule();
    Ok(integrate(pair, v, w, h, &rule, |val, grad| {
        -dot(&val[1], &mat_vec(&grad[2], &val[0]))
    }))
}

/// `½∫ (div v)(w·h)`, the difference between the two forms.
pub fn divergence_correction(pair: &SpacePair, v: &[f64], w: &[f64], h: &[f64]) -> Result<f64> {
    check_len(pair, &[v, w, h])?;
    let rule = pair.default_rule();
    Ok(integrate(pair, v, w, h, &rule, |val, grad| {
        0.5 * trace(&grad[0]) * dot(&val[1], &val[2])
    }))
}

/// `B[v, w, h]` in the chosen form (zero for [`Convection::None`]).
pub fn trilinear(conv: Convection, pair: &SpacePair, v: &[f64], w: &[f64], h: &[f64]) -> Result<f64> {
    match conv {
        Convection::None => {
            check_len(pair, &[v, w, h])?;
            Ok(0.0)
        }
        Convection::Skew => trilinear_skew(pair, v, w, h),
        Convection::Divfree => trilinear_divfree(pair, v, w, h),
    }
}
