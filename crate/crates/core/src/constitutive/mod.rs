//! Isotropic monotone constitutive graphs relating shear rate `δ` and
//! stress `σ`, their zero-at-zero selections, mollifications and the
//! `φ/s/d` parametrization of the full graph.

mod checks;
mod graph;
mod mollify;

pub use checks::{
    mollified_bounds, AxiomReport, BoundsReport, BoundsRow, Constants, IdentityReport, PhiLipschitzRow,
};
pub use graph::GraphPoint;
pub use mollify::MollifiedLaw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frob, is_symmetric, mat_scale, Mat3, ZERO33};

/// Built-in law families with their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum LawKind {
    /// `σ = 2μ δ`.
    Newtonian { mu: f64 },
    /// `σ = 2μ |δ|^{r−2} δ`.
    PowerLaw { mu: f64, r: f64 },
    /// Stress-parametrized power law `δ = α |σ|^{r′−2} σ`.
    StressPowerLaw { alpha: f64, r: f64 },
    /// Viscosity depending on the stress: `δ = (1 + |σ|²)^{(r′−2)/2} σ / (2μ)`.
    ShearStress { mu: f64, r: f64 },
    /// `σ = 2μ δ + τ δ/|δ|` for `δ ≠ 0`, `|σ| ≤ τ` at `δ = 0`.
    Bingham { mu: f64, tau: f64 },
    /// `σ = 2μ |δ|^{r−2} δ + τ δ/|δ|` for `δ ≠ 0`, `|σ| ≤ τ` at `δ = 0`.
    HerschelBulkley { mu: f64, tau: f64, r: f64 },
}

impl LawKind {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::Newtonian { .. } => "newtonian",
            LawKind::PowerLaw { .. } => "power-law",
            LawKind::StressPowerLaw { .. } => "stress-power-law",
            LawKind::ShearStress { .. } => "shear-stress",
            LawKind::Bingham { .. } => "bingham",
            LawKind::HerschelBulkley { .. } => "herschel-bulkley",
        }
    }

    /// Builds a law from its catalog name; missing parameters default to 1
    /// (`r` defaults to 2).
    pub fn from_name(name: &str, mu: Option<f64>, tau: Option<f64>, r: Option<f64>) -> Result<Self> {
        let mu = mu.unwrap_or(1.0);
        let tau = tau.unwrap_or(1.0);
        let r = r.unwrap_or(2.0);
        let kind = match name {
            "newtonian" => LawKind::Newtonian { mu },
            "power-law" => LawKind::PowerLaw { mu, r },
            "stress-power-law" => LawKind::StressPowerLaw { alpha: mu, r },
            "shear-stress" => LawKind::ShearStress { mu, r },
            "bingham" => LawKind::Bingham { mu, tau },
            "herschel-bulkley" => LawKind::HerschelBulkley { mu, tau, r },
            other => return Err(Error::invalid(format!("unknown law `{other}`"))),
        };
        Ok(kind)
    }
}

/// A homogeneous isotropic maximal monotone `r`-graph in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphLaw {
    pub kind: LawKind,
    pub dim: usize,
}

impl GraphLaw {
    pub fn new(kind: LawKind, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in {{2, 3}}")));
        }
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        let exp = |r: f64| {
            if r > 1.0 && r.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("exponent r must lie in (1, ∞), got {r}")))
            }
        };
        match kind {
            LawKind::Newtonian { mu } => pos(mu, "mu")?,
            LawKind::PowerLaw { mu, r } | LawKind::ShearStress { mu, r } => {
                pos(mu, "mu")?;
                exp(r)?
            }
            LawKind::StressPowerLaw { alpha, r } => {
                pos(alpha, "alpha")?;
                exp(r)?
            }
            LawKind::Bingham { mu, tau } => {
                pos(mu, "mu")?;
                pos(tau, "tau")?
            }
            LawKind::HerschelBulkley { mu, tau, r } => {
                pos(mu, "mu")?;
                pos(tau, "tau")?;
                exp(r)?
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn r(&self) -> f64 {
        match self.kind {
            LawKind::Newtonian { .. } | LawKind::Bingham { .. } => 2.0,
            LawKind::PowerLaw { r, .. }
            | LawKind::StressPowerLaw { r, .. }
            | LawKind::ShearStress { r, .. }
            | LawKind::HerschelBulkley { r, .. } => r,
        }
    }

    /// Conjugate exponent `r′` with `1/r + 1/r′ = 1`.
    pub fn r_conj(&self) -> f64 {
        let r = self.r();
        r / (r - 1.0)
    }

    /// Yield stress `σ̂(0⁺)`; zero for single-valued laws.
    pub fn jump(&self) -> f64 {
        match self.kind {
            LawKind::Bingham { tau, .. } | LawKind::HerschelBulkley { tau, .. } => tau,
            _ => 0.0,
        }
    }

    pub fn is_single_valued(&self) -> bool {
        self.jump() == 0.0
    }

    /// All built-in laws are homogeneous in space.
    pub fn is_x_dependent(&self) -> bool {
        false
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, LawKind::Newtonian { .. })
    }

    /// Radial profile `σ̂(t)` for `t > 0`: `|S*(δ)| = σ̂(|δ|)`.
    pub fn radial(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kind {
            LawKind::Newtonian { mu } => 2.0 * mu * t,
            LawKind::PowerLaw { mu, r } => 2.0 * mu * t.powf(r - 1.0),
            LawKind::StressPowerLaw { alpha, r } => (t / alpha).powf(r - 1.0),
            LawKind::ShearStress { mu, r } => shear_stress_inverse(mu, r / (r - 1.0), t),
            LawKind::Bingham { mu, tau } => 2.0 * mu * t + tau,
            LawKind::HerschelBulkley { mu, tau, r } => 2.0 * mu * t.powf(r - 1.0) + tau,
        }
    }

    /// `σ̂′(t)` for `t > 0`.
    pub fn radial_derivative(&self, t: f64) -> f64 {
        let t = t.max(f64::MIN_POSITIVE);
        match self.kind {
            LawKind::Newtonian { mu } | LawKind::Bingham { mu, .. } => 2.0 * mu,
            LawKind::PowerLaw { mu, r } | LawKind::HerschelBulkley { mu, r, .. } => {
                2.0 * mu * (r - 1.0) * t.powf(r - 2.0)
            }
            LawKind::StressPowerLaw { alpha, r } => (r - 1.0) / alpha * (t / alpha).powf(r - 2.0),
            LawKind::ShearStress { mu, r } => {
                let rc = r / (r - 1.0);
                let s = shear_stress_inverse(mu, rc, t);
                // dt/ds of t(s) = (1+s²)^{(r′−2)/2} s / (2μ)
                let dt = (1.0 + s * s).powf((rc - 4.0) / 2.0) * (1.0 + (rc - 1.0) * s * s) / (2.0 * mu);
                1.0 / dt
            }
        }
    }

    /// `(σ̂(t), σ̂′(t))` in one evaluation (one inversion for stress-defined
    /// laws).
    pub fn radial_with_derivative(&self, t: f64) -> (f64, f64) {
        match self.kind {
            LawKind::ShearStress { mu, r } if t > 0.0 => {
                let rc = r / (r - 1.0);
                let s = shear_stress_inverse(mu, rc, t);
                let dt = (1.0 + s * s).powf((rc - 4.0) / 2.0) * (1.0 + (rc - 1.0) * s * s) / (2.0 * mu);
                (s, 1.0 / dt)
            }
            _ => (self.radial(t), self.radial_derivative(t)),
        }
    }

    /// Selection `S*(δ)`, rejecting non-symmetric input.
    pub fn eval_selection(&self, delta: &Mat3) -> Result<Mat3> {
        if !is_symmetric(delta, 1e-12) {
            return Err(Error::invalid("shear rate must be a symmetric matrix"));
        }
        Ok(self.stress(delta))
    }

    /// Selection `S*(δ) = σ̂(|δ|) δ/|δ|`, with `S*(0) = 0`.
    #[inline]
    pub fn stress(&self, delta: &Mat3) -> Mat3 {
        let t = frob(delta);
        if t == 0.0 {
            return ZERO33;
        }
        mat_scale(self.radial(t) / t, delta)
    }

    /// `G(ζ) = S*(ζ) + ζ`.
    pub fn g_map(&self, zeta: &Mat3) -> Mat3 {
        crate::linalg::mat_add(&self.stress(zeta), zeta)
    }
}

/// Solves `t = (1 + s²)^{(r′−2)/2} s / (2μ)` for `s ≥ 0`.
fn shear_stress_inverse(mu: f64, rc: f64, t: f64) -> f64 {
    // Newton on ln t(eᵘ) = ((r′−2)/2) ln(1+e²ᵘ) + u − ln 2μ, whose slope
    // lies between 1 and r′−1 and is monotone: no bracketing needed
    let target = t.ln() + (2.0 * mu).ln();
    let a = 2.0 * mu * t;
    let mut u = if a < 1.0 { a.ln() } else { a.ln() / (rc - 1.0) };
    for _ in 0..100 {
        let s2 = (2.0 * u).exp();
        let g = 0.5 * (rc - 2.0) * s2.ln_1p() + u - target;
        let dg = (rc - 2.0) * s2 / (1.0 + s2) + 1.0;
        let du = g / dg;
        u -= du;
        if du.abs() <= 1e-15 * u.abs().max(1.0) {
            break;
        }
    }
    u.exp()
}

/// Either the raw selection or a mollified law; what the solver evaluates.
#[derive(Debug, Clone)]
pub enum StressModel {
    Selection(GraphLaw),
    Mollified(MollifiedLaw),
}

impl StressModel {
    pub fn law(&self) -> &GraphLaw {
        match self {
            StressModel::Selection(l) => l,
            StressModel::Mollified(m) => m.law(),
        }
    }

    /// Radial profile `Γ(t)` and its derivative.
    pub fn profile(&self, t: f64) -> (f64, f64) {
        match self {
            StressModel::Selection(l) => (l.radial(t), l.radial_derivative(t)),
            StressModel::Mollified(m) => m.profile_with_derivative(t),
        }
    }

    pub fn stress(&self, delta: &Mat3) -> Mat3 {
        match self {
            StressModel::Selection(l) => l.stress(delta),
            StressModel::Mollified(m) => m.stress(delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64) -> Mat3 {
        [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, 0.0]]
    }

    #[test]
    fn newtonian_and_power_law_values() {
        let n = GraphLaw::new(LawKind::Newtonian { mu: 1.0 }, 2).unwrap();
        assert_eq!(n.eval_selection(&diag(1.0, -1.0)).unwrap(), diag(2.0, -2.0));
        let p = GraphLaw::new(LawKind::PowerLaw { mu: 1.0, r: 3.0 }, 2).unwrap();
        assert_eq!(p.eval_selection(&diag(1.0, 0.0)).unwrap(), diag(2.0, 0.0));
    }

    #[test]
    fn bingham_jump_at_zero() {
        let b = GraphLaw::new(LawKind::Bingham { mu: 1.0, tau: 1.0 }, 2).unwrap();
        assert_eq!(b.stress(&ZERO33), ZERO33);
        for k in 1..=6 {
            let t = 10f64.powi(-k);
            let s = frob(&b.stress(&diag(t, 0.0)));
            assert!((s - 1.0 - 2.0 * t).abs() < 1e-15);
        }
    }

    #[test]
    fn non_symmetric_rejected() {
        let n = GraphLaw::new(LawKind::Newtonian { mu: 1.0 }, 2).unwrap();
        let mut d = diag(1.0, 0.0);
        d[0][1] = 1.0;
        assert!(matches!(n.eval_selection(&d), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn shear_stress_profile_inverts() {
        let l = GraphLaw::new(LawKind::ShearStress { mu: 0.7, r: 1.6 }, 2).unwrap();
        let rc = l.r_conj();
        for t in [1e-3, 0.5, 3.0, 40.0] {
            let s = l.radial(t);
            let back = (1.0 + s * s).powf((rc - 2.0) / 2.0) * s / 1.4;
            assert!((back - t).abs() < 1e-12 * t.max(1.0));
            let h = 1e-6 * t;
            let fd = (l.radial(t + h) - l.radial(t - h)) / (2.0 * h);
            assert!((fd - l.radial_derivative(t)).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }
}
