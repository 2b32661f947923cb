//! Manufactured solution `u = curl ψ`, `ψ = A x²(1−x)² y²(1−y)²`,
//! `p = x − ½` on the unit square, with the body force computed by exact
//! differentiation for any built-in law.

use crate::constitutive::GraphLaw;
use crate::elements::VectorField;
use crate::linalg::{frob, sym, Mat3, Vec3, ZERO3, ZERO33};

#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub amplitude: f64,
    pub law: GraphLaw,
    pub convection: bool,
}

/// `g(s) = s²(1−s)²` and its first three derivatives.
fn g(s: f64) -> [f64; 4] {
    [
        s * s * (1.0 - s) * (1.0 - s),
        2.0 * s - 6.0 * s * s + 4.0 * s * s * s,
        2.0 - 12.0 * s + 12.0 * s * s,
        -12.0 + 24.0 * s,
    ]
}

impl Manufactured {
    pub fn new(law: GraphLaw, amplitude: f64, convection: bool) -> Self {
        Self {
            amplitude,
            law,
            convection,
        }
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let a = self.amplitude;
        [a * gx[0] * gy[1], -a * gx[1] * gy[0], 0.0]
    }

    pub fn velocity_gradient(&self, x: &Vec3) -> Mat3 {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let a = self.amplitude;
        let mut m = ZERO33;
        m[0] = [a * gx[1] * gy[1], a * gx[0] * gy[2], 0.0];
        m[1] = [-a * gx[2] * gy[0], -a * gx[1] * gy[1], 0.0];
        m
    }

    pub fn shear_rate(&self, x: &Vec3) -> Mat3 {
        sym(&self.velocity_gradient(x))
    }

    pub fn pressure(&self, x: &Vec3) -> f64 {
        x[0] - 0.5
    }

    /// `f = −div S(Du) + (u·∇)u + ∇p`.
    pub fn force(&self, x: &Vec3) -> Vec3 {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let a = self.amplitude;
        let d = self.shear_rate(x);
        // ∂_j D for j = x, y
        let mut dd = [ZERO33; 2];
        dd[0][0][0] = a * gx[2] * gy[1];
        dd[1][0][0] = a * gx[1] * gy[2];
        dd[0][0][1] = 0.5 * a * (gx[1] * gy[2] - gx[3] * gy[0]);
        dd[1][0][1] = 0.5 * a * (gx[0] * gy[3] - gx[2] * gy[1]);
        dd[0][1][0] = dd[0][0][1];
        dd[1][1][0] = dd[1][0][1];
        dd[0][1][1] = -dd[0][0][0];
        dd[1][1][1] = -dd[1][0][0];

        let t = frob(&d);
        let mut div_s = ZERO3;
        if t > 0.0 {
            let s = self.law.radial(t);
            let ds = self.law.radial_derivative(t);
            let gval = s / t;
            let gprime = (ds * t - s) / (t * t);
            for i in 0..2 {
                for j in 0..2 {
                    let dt_j = crate::linalg::ddot(&d, &dd[j]) / t;
                    div_s[i] += gval * dd[j][i][j] + gprime * dt_j * d[i][j];
                }
            }
        } else {
            // S = G(0) D near a zero of D; only the linear term survives
            let g0 = self.law.radial_derivative(0.0);
            if g0.is_finite() {
                for i in 0..2 {
                    for j in 0..2 {
                        div_s[i] += g0 * dd[j][i][j];
                    }
                }
            }
        }
        let mut f = [-div_s[0] + 1.0, -div_s[1], 0.0];
        if self.convection {
            let u = self.velocity(x);
            let gu = self.velocity_gradient(x);
            for i in 0..2 {
                f[i] += u[0] * gu[i][0] + u[1] * gu[i][1];
            }
        }
        f
    }
}

impl VectorField for Manufactured {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.velocity(x)
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.velocity_gradient(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::LawKind;

    #[test]
    fn velocity_is_solenoidal_and_force_matches_finite_differences() {
        let law = GraphLaw::new(LawKind::PowerLaw { mu: 0.5, r: 3.0 }, 2).unwrap();
        let m = Manufactured::new(law, 10.0, true);
        let x = [0.3, 0.65, 0.0];
        let gu = m.velocity_gradient(&x);
        assert!((gu[0][0] + gu[1][1]).abs() < 1e-14);
        // −div S by central differences of S(Du)
        let h = 1e-5;
        let s_at = |p: &Vec3| law.stress(&m.shear_rate(p));
        let mut div_s = [0.0; 2];
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (sp, sm) = (s_at(&xp), s_at(&xm));
            for i in 0..2 {
                div_s[i] += (sp[i][j] - sm[i][j]) / (2.0 * h);
            }
        }
        let u = m.velocity(&x);
        let f = m.force(&x);
        for i in 0..2 {
            let conv = u[0] * gu[i][0] + u[1] * gu[i][1];
            let grad_p = if i == 0 { 1.0 } else { 0.0 };
            assert!((f[i] - (-div_s[i] + conv + grad_p)).abs() < 1e-6, "{i}");
        }
    }
}
