//! Parametrization of the graph by `χ = δ + σ`: the pair `(σ, δ)` on the
//! graph with `δ + σ = χ` is unique and `φ(χ) = σ − δ` is 1-Lipschitz.

use super::GraphLaw;
use crate::error::{Error, Result};
use crate::linalg::{frob, mat_add, mat_scale, mat_sub, Mat3, ZERO33};

const MAX_BISECTION: usize = 200;

/// A point `(δ, σ)` on the graph together with `χ = δ + σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub delta: Mat3,
    pub sigma: Mat3,
    pub chi: Mat3,
}

impl GraphLaw {
    /// Radius `t = |δ|` of the graph point with `|χ| = c`: the solution of
    /// `t + σ̂(t) = c`, or 0 when `c` lies inside the yield jump.
    pub fn shear_radius(&self, c: f64) -> Result<f64> {
        if c <= self.jump() {
            return Ok(0.0);
        }
        let f = |t: f64| t + self.radial(t) - c;
        let (mut lo, mut hi) = (0.0f64, c);
        if f(hi) < 0.0 || !f(hi).is_finite() {
            return Err(Error::NumericalFailure {
                message: format!("root bracket failure for |χ| = {c}"),
                history: vec![f(lo), f(hi)],
            });
        }
        for _ in 0..MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-12 * 1e-4 {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `φ(χ) = σ − δ` for the graph point with `δ + σ = χ`.
    pub fn phi_of(&self, chi: &Mat3) -> Result<Mat3> {
        let p = self.graph_point(chi)?;
        Ok(mat_sub(&p.sigma, &p.delta))
    }

    /// `(s(χ), d(χ)) = (½(χ + φ), ½(χ − φ))`.
    pub fn s_d_split(&self, chi: &Mat3) -> Result<(Mat3, Mat3)> {
        let p = self.graph_point(chi)?;
        Ok((p.sigma, p.delta))
    }

    pub fn graph_point(&self, chi: &Mat3) -> Result<GraphPoint> {
        let c = frob(chi);
        if c == 0.0 {
            return Ok(GraphPoint {
                delta: ZERO33,
                sigma: ZERO33,
                chi: *chi,
            });
        }
        let t = self.shear_radius(c)?;
        let delta = mat_scale(t / c, chi);
        // σ = χ − δ keeps s + d = χ exact
        let sigma = mat_sub(chi, &delta);
        Ok(GraphPoint {
            delta,
            sigma,
            chi: *chi,
        })
    }

    /// Graph point obtained from a shear rate through the selection.
    pub fn point_from_shear(&self, delta: &Mat3) -> GraphPoint {
        let sigma = self.stress(delta);
        GraphPoint {
            delta: *delta,
            sigma,
            chi: mat_add(delta, &sigma),
        }
    }
}
