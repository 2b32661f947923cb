//! Sampled verification of the graph axioms, the mollified bounds and the
//! representation identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GraphLaw, MollifiedLaw};
use crate::error::Result;
use crate::linalg::{ddot, frob, mat_add, mat_scale, mat_sub, Mat3, ZERO33};

/// Shear-rate magnitudes are sampled log-uniformly in `[T_MIN, T_MAX]`.
const T_MIN: f64 = 1e-4;
const T_MAX: f64 = 1e4;
/// Leading constants are fitted on `|δ| ≥ T_FIT`, offsets on all samples.
const T_FIT: f64 = 10.0;
/// The growth exponent is fitted by log-log regression on `|δ| ≥ T_SLOPE`.
const T_SLOPE: f64 = 100.0;

/// Random symmetric matrix with Frobenius norm `t`.
pub(crate) fn random_sym(rng: &mut ChaCha8Rng, dim: usize, t: f64) -> Mat3 {
    let mut a = ZERO33;
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    let n = frob(&a);
    if n == 0.0 {
        a[0][0] = t;
        return a;
    }
    mat_scale(t / n, &a)
}

pub(crate) fn random_shear(rng: &mut ChaCha8Rng, dim: usize) -> Mat3 {
    let t = (T_MIN.ln() + rng.gen::<f64>() * (T_MAX.ln() - T_MIN.ln())).exp();
    random_sym(rng, dim, t)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AxiomReport {
    pub law: String,
    pub samples: usize,
    /// `S*(0) = 0`.
    pub zero_at_zero: bool,
    /// `min (σ₁−σ₂):(δ₁−δ₂) / (|σ₁−σ₂||δ₁−δ₂|)` over sampled pairs.
    pub min_monotonicity: f64,
    /// Largest negative part of the normalized monotonicity product.
    pub worst_violation: f64,
    /// Growth `|σ| ≤ c₁|δ|^{r−1} + k`.
    pub c1: f64,
    pub k: f64,
    /// Coercivity `σ:δ ≥ c₂|δ|^r − m`.
    pub c2: f64,
    pub m: f64,
    /// Log-log slope of `|σ|` against `|δ|` for large `|δ|` (≈ r − 1).
    pub growth_exponent: f64,
}

impl AxiomReport {
    pub fn passes(&self) -> bool {
        self.zero_at_zero && self.min_monotonicity >= -1e-12 && self.c2 > 0.0
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Constants {
    pub c1: f64,
    pub k: f64,
    pub c2: f64,
    pub m: f64,
}

fn fit_constants(r: f64, data: &[(f64, f64, f64)]) -> (Constants, f64) {
    let mut c1: f64 = 0.0;
    let mut c2 = f64::INFINITY;
    for &(t, s, p) in data.iter().filter(|d| d.0 >= T_FIT) {
        c1 = c1.max(s / t.powf(r - 1.0));
        c2 = c2.min(p / t.powf(r));
    }
    let mut k: f64 = 0.0;
    let mut m: f64 = 0.0;
    for &(t, s, p) in data {
        k = k.max(s - c1 * t.powf(r - 1.0));
        m = m.max(c2 * t.powf(r) - p);
    }
    let pts: Vec<(f64, f64)> = data
        .iter()
        .filter(|d| d.0 >= T_SLOPE && d.1 > 0.0)
        .map(|d| (d.0.ln(), d.1.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    (Constants { c1, k, c2, m }, slope)
}

/// Normalized monotonicity products over seeded pairs: independent pairs,
/// nearby pairs and antipodal pairs.
fn monotonicity(
    dim: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    s: &dyn Fn(&Mat3) -> Mat3,
) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..count {
        let d1 = random_shear(rng, dim);
        let d2 = match i % 3 {
            0 => random_shear(rng, dim),
            1 => {
                let eps = frob(&d1) * 10f64.powf(rng.gen_range(-6.0..0.0));
                mat_add(&d1, &random_sym(rng, dim, eps))
            }
            _ => mat_scale(-rng.gen_range(0.0..2.0), &d1),
        };
        let ds = mat_sub(&s(&d1), &s(&d2));
        let dd = mat_sub(&d1, &d2);
        let denom = frob(&ds) * frob(&dd);
        if denom > 0.0 {
            worst = worst.min(ddot(&ds, &dd) / denom);
        }
    }
    worst
}

fn sample_profile(
    dim: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    s: &dyn Fn(&Mat3) -> Mat3,
) -> Vec<(f64, f64, f64)> {
    (0..count)
        .map(|_| {
            let d = random_shear(rng, dim);
            let sig = s(&d);
            (frob(&d), frob(&sig), ddot(&sig, &d))
        })
        .collect()
}

impl GraphLaw {
    /// Sampled axiom check; deterministic given `seed`.
    pub fn check_axioms(&self, sample_count: usize, seed: u64) -> AxiomReport {
        let sample_count = sample_count.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = |d: &Mat3| self.stress(d);
        let min_mono = monotonicity(self.dim, sample_count, &mut rng, &s);
        let data = sample_profile(self.dim, sample_count, &mut rng, &s);
        let (c, slope) = fit_constants(self.r(), &data);
        AxiomReport {
            law: self.kind.name().to_string(),
            samples: sample_count,
            zero_at_zero: self.stress(&ZERO33) == ZERO33,
            min_monotonicity: min_mono,
            worst_violation: (-min_mono).max(0.0),
            c1: c.c1,
            k: c.k,
            c2: c.c2,
            m: c.m,
            growth_exponent: slope,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundsRow {
    pub n: u32,
    pub constants: Constants,
    pub min_monotonicity: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundsReport {
    pub law: String,
    pub rows: Vec<BoundsRow>,
    /// Largest relative change of `c₁, c₂` between the last two indices.
    pub last_pair_variation: f64,
}

impl BoundsReport {
    pub fn stable(&self, tol: f64) -> bool {
        self.last_pair_variation < tol
    }
}

impl MollifiedLaw {
    /// Empirical constants of the uniform-in-`n` growth/coercivity bounds.
    pub fn bounds(&self, sample_count: usize, seed: u64) -> BoundsRow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = |d: &Mat3| self.stress(d);
        let dim = self.law().dim;
        let min_mono = monotonicity(dim, sample_count.max(1), &mut rng, &s);
        let data = sample_profile(dim, sample_count.max(1), &mut rng, &s);
        BoundsRow {
            n: self.index(),
            constants: fit_constants(self.law().r(), &data).0,
            min_monotonicity: min_mono,
        }
    }
}

/// Bounds of `Sⁿ` for `n ∈ {1, 2, 4, …, n_max}` (same samples for each `n`).
pub fn mollified_bounds(law: &GraphLaw, n_max: u32, sample_count: usize, seed: u64) -> BoundsReport {
    let indices: Vec<u32> = std::iter::successors(Some(1u32), |n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect();
    let rows: Vec<BoundsRow> = indices
        .iter()
        .map(|&n| MollifiedLaw::new(*law, n).bounds(sample_count, seed))
        .collect();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let last_pair_variation = if rows.len() >= 2 {
        let (a, b) = (&rows[rows.len() - 2].constants, &rows[rows.len() - 1].constants);
        rel(a.c1, b.c1).max(rel(a.c2, b.c2))
    } else {
        0.0
    };
    BoundsReport {
        law: law.kind.name().to_string(),
        rows,
        last_pair_variation,
    }
}

/// Largest residuals of the graph-representation identities.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IdentityReport {
    pub samples: usize,
    /// `|σ − δ − φ(σ + δ)|`, relative to `max(1, |χ|)`.
    pub phi_residual: f64,
    /// `|s + d − χ|`.
    pub split_residual: f64,
    /// `|d(G(ζ)) − ζ|` and `|s(G(ζ)) − S*(ζ)|`.
    pub g_residual: f64,
}

impl GraphLaw {
    pub fn check_identities(&self, sample_count: usize, seed: u64) -> Result<IdentityReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut rp, mut rs, mut rg) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..sample_count {
            let zeta = random_shear(&mut rng, self.dim);
            let p = self.point_from_shear(&zeta);
            let scale = frob(&p.chi).max(1.0);
            let phi = self.phi_of(&p.chi)?;
            rp = rp.max(frob(&mat_sub(&mat_sub(&p.sigma, &p.delta), &phi)) / scale);
            let radius = frob(&p.chi) * rng.gen_range(0.0..2.0);
            let chi = random_sym(&mut rng, self.dim, radius);
            let (s, d) = self.s_d_split(&chi)?;
            rs = rs.max(frob(&mat_sub(&mat_add(&s, &d), &chi)) / frob(&chi).max(1.0));
            let g = self.g_map(&zeta);
            let (s, d) = self.s_d_split(&g)?;
            let e1 = frob(&mat_sub(&d, &zeta));
            let e2 = frob(&mat_sub(&s, &p.sigma));
            rg = rg.max(e1.max(e2) / scale);
        }
        Ok(IdentityReport {
            samples: sample_count,
            phi_residual: rp,
            split_residual: rs,
            g_residual: rg,
        })
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PhiLipschitzRow {
    pub chi_norm: f64,
    pub phi_norm: f64,
    /// Largest finite-difference quotient `|φ(χ+h) − φ(χ)| / |h|`.
    pub lipschitz: f64,
}

impl GraphLaw {
    /// Finite-difference Lipschitz quotients of `φ` at `χ = c·E` for each `c`
    /// in `levels`, over a handful of seeded directions.
    pub fn phi_lipschitz(&self, levels: &[f64], seed: u64) -> Result<Vec<PhiLipschitzRow>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for &c in levels {
            let mut chi = ZERO33;
            chi[0][0] = c;
            let phi = self.phi_of(&chi)?;
            let mut lip: f64 = 0.0;
            for k in 0..16 {
                let h = 1e-4 * c.max(1e-3);
                let dir = if k == 0 {
                    let mut e = ZERO33;
                    e[0][0] = h;
                    e
                } else {
                    random_sym(&mut rng, self.dim, h)
                };
                let p2 = self.phi_of(&mat_add(&chi, &dir))?;
                lip = lip.max(frob(&mat_sub(&p2, &phi)) / h);
            }
            rows.push(PhiLipschitzRow {
                chi_norm: c,
                phi_norm: frob(&phi),
                lipschitz: lip,
            });
        }
        Ok(rows)
    }
}
