//! Gauss–Legendre rules and collapsed-coordinate (Duffy) rules on the
//! reference simplex. Weights are normalized to sum to one; callers multiply
//! by the cell measure.

/// Gauss–Legendre nodes and weights on `[0, 1]`, weights summing to 1.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        // Chebyshev-like initial guess, then Newton on P_k.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(k, x);
        // map [-1,1] -> [0,1]; reference weights sum to 2, normalized ones to 1
        nodes[k - 1 - i] = 0.5 * (1.0 + x);
        weights[k - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=k {
        let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature rule on the reference simplex in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    /// Barycentric coordinates `(λ0, …, λd)`; unused entries are zero.
    pub bary: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Collapsed tensor rule with `k` Gauss points per direction. In 2D it is
    /// exact for polynomials of degree `2k − 2`, in 3D for degree `2k − 3`.
    pub fn collapsed(dim: usize, k: usize) -> Self {
        let (x, w) = gauss_legendre(k);
        let mut bary = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for i in 0..k {
                    bary.push([1.0 - x[i], x[i], 0.0, 0.0]);
                    weights.push(w[i]);
                }
            }
            2 => {
                for i in 0..k {
                    for j in 0..k {
                        let a = x[i];
                        let b = x[j] * (1.0 - a);
                        bary.push([1.0 - a - b, a, b, 0.0]);
                        weights.push(2.0 * w[i] * w[j] * (1.0 - a));
                    }
                }
            }
            3 => {
                for i in 0..k {
                    for j in 0..k {
                        for l in 0..k {
                            let a = x[i];
                            let b = x[j] * (1.0 - a);
                            let c = x[l] * (1.0 - a) * (1.0 - x[j]);
                            bary.push([1.0 - a - b - c, a, b, c]);
                            weights.push(
                                6.0 * w[i] * w[j] * w[l] * (1.0 - a) * (1.0 - a) * (1.0 - x[j]),
                            );
                        }
                    }
                }
            }
            _ => panic!("unsupported simplex dimension {dim}"),
        }
        Self { dim, bary, weights }
    }

    /// Smallest collapsed rule exact for polynomials of the given degree.
    pub fn for_degree(dim: usize, degree: usize) -> Self {
        let k = match dim {
            1 => degree / 2 + 1,
            2 => (degree + 2).div_ceil(2),
            _ => (degree + 3).div_ceil(2),
        };
        Self::collapsed(dim, k.max(1))
    }

    /// Triangle rule for integrands that are smooth along rays from each
    /// vertex but not at the vertices themselves. The triangle is split
    /// into six pieces by the barycenter and the edge midpoints; each piece
    /// holds one vertex, at which a collapsed rule with `k` points per
    /// direction is centred, turning such vertex singularities into smooth
    /// integrands.
    pub fn vertex_graded(k: usize) -> Self {
        let base = Self::collapsed(2, k);
        let g = [1.0 / 3.0; 3];
        let mut bary = Vec::with_capacity(6 * base.len());
        let mut weights = Vec::with_capacity(6 * base.len());
        for v in 0..3 {
            for o in 0..3 {
                if o == v {
                    continue;
                }
                let mut corner = [0.0; 3];
                corner[v] = 1.0;
                let mut mid = [0.0; 3];
                mid[v] = 0.5;
                mid[o] = 0.5;
                // local vertex 1 of the collapsed rule is the collapse point
                let pts = [mid, corner, g];
                for q in 0..base.len() {
                    let l = base.bary[q];
                    let mut b = [0.0; 4];
                    for (k, p) in pts.iter().enumerate() {
                        for i in 0..3 {
                            b[i] += l[k] * p[i];
                        }
                    }
                    bary.push(b);
                    weights.push(base.weights[q] / 6.0);
                }
            }
        }
        Self { dim: 2, bary, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates `(λ1, …, λd)` of point `q`.
    pub fn ref_point(&self, q: usize) -> [f64; 3] {
        let b = &self.bary[q];
        [b[1], b[2], b[3]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral_2d(a: u32, b: u32) -> f64 {
        // ∫_T x^a y^b over the unit triangle, divided by |T| = 1/2
        let f = |n: u32| (1..=n).map(|v| v as f64).product::<f64>();
        2.0 * f(a) * f(b) / f(a + b + 2)
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for k in 1..12 {
            let (x, w) = gauss_legendre(k);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..(2 * k) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn collapsed_triangle_exact_to_claimed_degree() {
        for k in 1..7 {
            let rule = SimplexRule::collapsed(2, k);
            for deg in 0..=(2 * k - 2) as u32 {
                for a in 0..=deg {
                    let b = deg - a;
                    let s: f64 = (0..rule.len())
                        .map(|q| {
                            let p = rule.ref_point(q);
                            rule.weights[q] * p[0].powi(a as i32) * p[1].powi(b as i32)
                        })
                        .sum();
                    assert!((s - monomial_integral_2d(a, b)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn collapsed_tet_integrates_quadratics() {
        let rule = SimplexRule::for_degree(3, 4);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // ∫ x y z over the unit tet = 1/720, |T| = 1/6
        let s: f64 = (0..rule.len())
            .map(|q| {
                let p = rule.ref_point(q);
                rule.weights[q] * p[0] * p[1] * p[2]
            })
            .sum();
        assert!((s - 6.0 / 720.0).abs() < 1e-14);
        let s2: f64 = (0..rule.len())
            .map(|q| rule.weights[q] * rule.ref_point(q)[0].powi(4))
            .sum();
        assert!((s2 - 6.0 * 24.0 / 5040.0).abs() < 1e-14);
    }
}
