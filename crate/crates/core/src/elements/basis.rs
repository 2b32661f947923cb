//! Local shape functions expressed in barycentric coordinates.

use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};
use crate::mesh::local_edges;

/// Scalar spaces used component-wise by the Lagrange-type pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarSpace {
    P1,
    P1Bubble,
    P2,
    P2Bubble,
}

impl ScalarSpace {
    pub fn len(self, dim: usize) -> usize {
        let nv = dim + 1;
        let ne = local_edges(dim).len();
        match self {
            ScalarSpace::P1 => nv,
            ScalarSpace::P1Bubble => nv + 1,
            ScalarSpace::P2 => nv + ne,
            ScalarSpace::P2Bubble => nv + ne + 1,
        }
    }

    pub fn has_edges(self) -> bool {
        matches!(self, ScalarSpace::P2 | ScalarSpace::P2Bubble)
    }

    pub fn has_bubble(self) -> bool {
        matches!(self, ScalarSpace::P1Bubble | ScalarSpace::P2Bubble)
    }

    /// Polynomial degree.
    pub fn degree(self, dim: usize) -> usize {
        match self {
            ScalarSpace::P1 => 1,
            ScalarSpace::P2 => 2,
            _ => dim + 1,
        }
    }
}

/// Element bubble `c Π λ_i`, scaled to 1 at the barycenter.
fn bubble(dim: usize, lam: &[f64; 4], glam: &[Vec3; 4]) -> (f64, Vec3) {
    let nv = dim + 1;
    let scale = (nv as f64).powi(nv as i32);
    let mut v = scale;
    for l in lam.iter().take(nv) {
        v *= l;
    }
    let mut g = ZERO3;
    for i in 0..nv {
        let mut p = scale;
        for (j, l) in lam.iter().enumerate().take(nv) {
            if j != i {
                p *= l;
            }
        }
        for k in 0..3 {
            g[k] += p * glam[i][k];
        }
    }
    (v, g)
}

/// Values and physical gradients of the local scalar basis: vertex
/// functions, then edge functions in local edge order, then the bubble.
pub fn scalar_basis(
    space: ScalarSpace,
    dim: usize,
    lam: &[f64; 4],
    glam: &[Vec3; 4],
    vals: &mut [f64],
    grads: &mut [Vec3],
) {
    let nv = dim + 1;
    let quadratic = space.has_edges();
    for i in 0..nv {
        if quadratic {
            vals[i] = lam[i] * (2.0 * lam[i] - 1.0);
            grads[i] = glam[i].map(|g| (4.0 * lam[i] - 1.0) * g);
        } else {
            vals[i] = lam[i];
            grads[i] = glam[i];
        }
    }
    let mut next = nv;
    if quadratic {
        for &[a, b] in local_edges(dim) {
            vals[next] = 4.0 * lam[a] * lam[b];
            for k in 0..3 {
                grads[next][k] = 4.0 * (lam[a] * glam[b][k] + lam[b] * glam[a][k]);
            }
            next += 1;
        }
    }
    if space.has_bubble() {
        let (v, g) = bubble(dim, lam, glam);
        vals[next] = v;
        grads[next] = g;
    }
}

/// Second-order data of a function `F(λ)` of barycentric coordinates.
struct Jet {
    value: f64,
    /// `∂F/∂λ_p`.
    d1: [f64; 3],
    /// `∂²F/∂λ_p∂λ_q`.
    d2: [[f64; 3]; 3],
}

/// `b = p² q` in terms of `(λ_i, λ_{i+1}, λ_{i+2})`.
fn jet_b(l: [f64; 3]) -> Jet {
    let (p, q) = (l[1], l[2]);
    Jet {
        value: p * p * q,
        d1: [0.0, 2.0 * p * q, p * p],
        d2: [[0.0; 3], [0.0, 2.0 * q, 2.0 * p], [0.0, 2.0 * p, 0.0]],
    }
}

/// Rational bubble `a b² c² / ((a+b)(a+c))`, extended by zero where the
/// denominator vanishes.
fn jet_rational(l: [f64; 3]) -> Jet {
    let [a, b, c] = l;
    let den = (a + b) * (a + c);
    if den.abs() < 1e-28 {
        return Jet {
            value: 0.0,
            d1: [0.0; 3],
            d2: [[0.0; 3]; 3],
        };
    }
    let n = a * b * b * c * c;
    let n1 = [b * b * c * c, 2.0 * a * b * c * c, 2.0 * a * b * b * c];
    let n2 = [
        [0.0, 2.0 * b * c * c, 2.0 * b * b * c],
        [2.0 * b * c * c, 2.0 * a * c * c, 4.0 * a * b * c],
        [2.0 * b * b * c, 4.0 * a * b * c, 2.0 * a * b * b],
    ];
    let d1 = [2.0 * a + b + c, a + c, a + b];
    let d2 = [[2.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
    let f = n / den;
    let mut f1 = [0.0; 3];
    for p in 0..3 {
        f1[p] = (n1[p] - f * d1[p]) / den;
    }
    let mut f2 = [[0.0; 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            f2[p][q] = (n2[p][q] - f1[p] * d1[q] - f1[q] * d1[p] - f * d2[p][q]) / den;
        }
    }
    Jet {
        value: f,
        d1: f1,
        d2: f2,
    }
}

/// Physical curl `(∂_y F, −∂_x F)` and its gradient.
fn curl_of(jet: &Jet, g: [Vec3; 3]) -> (Vec3, Mat3) {
    let mut grad = ZERO3;
    let mut hess = ZERO33;
    for p in 0..3 {
        for k in 0..2 {
            grad[k] += jet.d1[p] * g[p][k];
        }
        for q in 0..3 {
            for j in 0..2 {
                for k in 0..2 {
                    hess[j][k] += jet.d2[p][q] * g[p][j] * g[q][k];
                }
            }
        }
    }
    let v = [grad[1], -grad[0], 0.0];
    let mut dv = ZERO33;
    for j in 0..2 {
        dv[0][j] = hess[1][j];
        dv[1][j] = -hess[0][j];
    }
    (v, dv)
}

/// The twelve spanning functions of the divergence-free-compatible local
/// space: affine vector fields `λ_j e_k` (index `2j + k`), then
/// `curl(λ_{i+1}² λ_{i+2})` (index `6 + i`) and the rational curl bubbles
/// (index `9 + i`).
pub fn gn_candidates(lam: &[f64; 4], glam: &[Vec3; 4], vals: &mut [Vec3; 12], grads: &mut [Mat3; 12]) {
    for j in 0..3 {
        for k in 0..2 {
            let mut v = ZERO3;
            v[k] = lam[j];
            let mut g = ZERO33;
            g[k] = glam[j];
            vals[2 * j + k] = v;
            grads[2 * j + k] = g;
        }
    }
    for i in 0..3 {
        let idx = [i, (i + 1) % 3, (i + 2) % 3];
        let l = idx.map(|t| lam[t]);
        let g = idx.map(|t| glam[t]);
        let (v, dv) = curl_of(&jet_b(l), g);
        vals[6 + i] = v;
        grads[6 + i] = dv;
        let (v, dv) = curl_of(&jet_rational(l), g);
        vals[9 + i] = v;
        grads[9 + i] = dv;
    }
}

/// Value of the rational bubble associated with local vertex `i`.
pub fn rational_bubble(i: usize, lam: &[f64; 4]) -> f64 {
    jet_rational([lam[i], lam[(i + 1) % 3], lam[(i + 2) % 3]]).value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_gradients() -> [Vec3; 4] {
        [[-1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], ZERO3]
    }

    #[test]
    fn rational_bubble_at_barycenter() {
        let t = 1.0 / 3.0;
        assert!((rational_bubble(0, &[t, t, t, 0.0]) - 1.0 / 108.0).abs() < 1e-16);
    }

    #[test]
    fn candidate_gradients_match_finite_differences() {
        let g = reference_gradients();
        let at = |x: f64, y: f64| {
            let lam = [1.0 - x - y, x, y, 0.0];
            let mut v = [ZERO3; 12];
            let mut d = [ZERO33; 12];
            gn_candidates(&lam, &g, &mut v, &mut d);
            (v, d)
        };
        let (x, y, h) = (0.23, 0.31, 1e-6);
        let (_, d) = at(x, y);
        let (vxp, _) = at(x + h, y);
        let (vxm, _) = at(x - h, y);
        let (vyp, _) = at(x, y + h);
        let (vym, _) = at(x, y - h);
        for f in 0..12 {
            for c in 0..2 {
                let fx = (vxp[f][c] - vxm[f][c]) / (2.0 * h);
                let fy = (vyp[f][c] - vym[f][c]) / (2.0 * h);
                assert!((fx - d[f][c][0]).abs() < 1e-7, "f={f} c={c}");
                assert!((fy - d[f][c][1]).abs() < 1e-7, "f={f} c={c}");
            }
            // curl fields are pointwise solenoidal
            if f >= 6 {
                assert!((d[f][0][0] + d[f][1][1]).abs() < 1e-12);
            }
        }
    }
}
