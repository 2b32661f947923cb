use super::GraphLaw;
use crate::linalg::{frob, mat_scale, Mat3, ZERO33};
use crate::quadrature::gauss_legendre;

/// `Sⁿ = S* ∗ ηⁿ` with `ηⁿ` a C∞ radial bump supported in the ball of radius
/// `1/n` of the symmetric-matrix space (dimension `m = d(d+1)/2`).
///
/// Because `S*` is isotropic, `Sⁿ(δ) = Γₙ(|δ|) δ/|δ|`. `Γₙ` is computed by
/// integrating over the unit ball in axial coordinate `ξ` (along `δ`) and
/// transverse radius `ρ`, with the measure `ρ^{m−2} dρ dξ`.
#[derive(Debug, Clone)]
pub struct MollifiedLaw {
    law: GraphLaw,
    n: u32,
    /// `(ξ, ρ, w)` with `Σw = 1`.
    nodes: Vec<(f64, f64, f64)>,
}

pub(crate) const AXIAL_NODES: usize = 48;
pub(crate) const RADIAL_NODES: usize = 24;

/// Unnormalized bump `exp(−1/(1−s²))` on `|s| < 1`.
pub fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

impl MollifiedLaw {
    pub fn new(law: GraphLaw, n: u32) -> Self {
        assert!(n >= 1, "mollification index must be at least 1");
        let m = law.dim * (law.dim + 1) / 2;
        let (xa, wa) = gauss_legendre(AXIAL_NODES);
        let (xr, wr) = gauss_legendre(RADIAL_NODES);
        let mut nodes = Vec::with_capacity(AXIAL_NODES * RADIAL_NODES);
        for i in 0..AXIAL_NODES {
            let xi = 2.0 * xa[i] - 1.0;
            let rmax = (1.0 - xi * xi).sqrt();
            for j in 0..RADIAL_NODES {
                let rho = rmax * xr[j];
                let w = wa[i] * wr[j] * rmax * rho.powi(m as i32 - 2) * bump(xi * xi + rho * rho);
                nodes.push((xi, rho, w));
            }
        }
        let total: f64 = nodes.iter().map(|n| n.2).sum();
        for nd in nodes.iter_mut() {
            nd.2 /= total;
        }
        Self { law, n, nodes }
    }

    pub fn law(&self) -> &GraphLaw {
        &self.law
    }

    pub fn index(&self) -> u32 {
        self.n
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.2)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `Γₙ(t)`.
    pub fn profile(&self, t: f64) -> f64 {
        if self.law.is_linear() || t == 0.0 {
            return self.law.radial(t);
        }
        let inv = 1.0 / self.n as f64;
        let mut g = 0.0;
        for &(xi, rho, w) in &self.nodes {
            let y1 = t - xi * inv;
            let y2 = rho * inv;
            let r = (y1 * y1 + y2 * y2).sqrt();
            if r > 0.0 {
                g += w * self.law.radial(r) * y1 / r;
            }
        }
        g
    }

    /// `Γₙ(t)` and `Γₙ′(t)`.
    pub fn profile_with_derivative(&self, t: f64) -> (f64, f64) {
        if self.law.is_linear() {
            return (self.law.radial(t), self.law.radial_derivative(t));
        }
        let inv = 1.0 / self.n as f64;
        let (mut g, mut dg) = (0.0, 0.0);
        for &(xi, rho, w) in &self.nodes {
            let y1 = t - xi * inv;
            let y2 = rho * inv;
            let r2 = y1 * y1 + y2 * y2;
            let r = r2.sqrt();
            if r == 0.0 {
                continue;
            }
            let (s, ds) = self.law.radial_with_derivative(r);
            g += w * s * y1 / r;
            dg += w * (ds * y1 * y1 / r2 + s / r * y2 * y2 / r2);
        }
        if t == 0.0 {
            // odd symmetry of the integrand in ξ
            g = 0.0;
        }
        (g, dg)
    }

    /// `Sⁿ(δ)`.
    pub fn stress(&self, delta: &Mat3) -> Mat3 {
        let t = frob(delta);
        if t == 0.0 {
            return ZERO33;
        }
        mat_scale(self.profile(t) / t, delta)
    }

    pub fn eval(&self, delta: &Mat3) -> crate::error::Result<Mat3> {
        self.law.eval_selection(delta)?;
        Ok(self.stress(delta))
    }
}
