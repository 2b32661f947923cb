//! Discrete inf-sup constant in the Hilbert case:
//!
//! ```text
//! β² = min { qᵀ B M_V⁻¹ Bᵀ q / qᵀ M_Q q : ∫q = 0 }
//! ```
//!
//! by block inverse iteration with Rayleigh–Ritz acceleration. One
//! application of `(B M_V⁻¹ Bᵀ)⁻¹ M_Q` is a single constrained solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::elements::{ConstrainedSolver, SpacePair};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, vec_dot, CsrMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct InfSupReport {
    pub beta: f64,
    /// Ritz values `β²` of the final block, ascending.
    pub ritz: Vec<f64>,
    pub iterations: usize,
    /// Relative change of the smallest Ritz value in the last iteration.
    pub change: f64,
}

const BLOCK: usize = 8;
const MAX_ITER: usize = 300;
const TOL: f64 = 1e-10;

/// Estimates `β₂` for the pair.
pub fn inf_sup_constant(pair: &SpacePair) -> Result<InfSupReport> {
    let rule = pair.default_rule();
    let mv = pair.velocity_gram(&rule);
    let b = pair.divergence_matrix(&rule);
    let mq = pair.pressure_mass(&rule);
    let mean = pair.pressure_integrals();
    let solver = ConstrainedSolver::new(&mv, &b, &mean)?;
    let np = pair.num_pressure();
    if np < 2 {
        return Err(Error::invalid("pressure space has no mean-zero functions"));
    }
    let k = BLOCK.min(np - 1);
    let total: f64 = mean.iter().sum();
    let project = |q: &mut [f64]| {
        let s = vec_dot(&mean, q) / total;
        q.iter_mut().for_each(|v| *v -= s);
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x1f5);
    let mut block: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut q: Vec<f64> = (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect();
            project(&mut q);
            q
        })
        .collect();

    let mut prev = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=MAX_ITER {
        // Y = S⁻¹ M_Q Q, tracked together with Z = Q so that S Y = M_Q Z
        let mut ys = Vec::with_capacity(block.len());
        for q in &block {
            let g: Vec<f64> = mq.mul_vec(q).iter().map(|v| -v).collect();
            let (_, mut mu) = solver.solve(&vec![0.0; pair.num_velocity()], &g)?;
            project(&mut mu);
            ys.push(mu);
        }
        let (ys, zs) = orthonormalize(&mq, ys, block);
        if ys.is_empty() {
            return Err(Error::numerical("inf-sup iteration collapsed"));
        }
        let m = ys.len();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            let mz = mq.mul_vec(&zs[i]);
            for j in 0..m {
                a[j][i] = vec_dot(&ys[j], &mz);
            }
        }
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (a[i][j] + a[j][i]);
                a[i][j] = s;
                a[j][i] = s;
            }
        }
        let (vals, vecs) = sym_eigen(&a);
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("eigen-solver breakdown in the inf-sup estimate"));
        }
        block = (0..m)
            .map(|c| {
                let mut q = vec![0.0; np];
                for r in 0..m {
                    let w = vecs[r][c];
                    q.iter_mut().zip(&ys[r]).for_each(|(a, y)| *a += w * y);
                }
                q
            })
            .collect();
        let lo = vals[0];
        change = ((lo - prev) / lo).abs();
        prev = lo;
        if change < TOL {
            return Ok(report(vals, it, change));
        }
        if it == MAX_ITER {
            return Ok(report(vals, it, change));
        }
    }
    Err(Error::NumericalFailure {
        message: format!("inf-sup iteration did not settle (change {change:.3e})"),
        history: Vec::new(),
    })
}

fn report(vals: Vec<f64>, iterations: usize, change: f64) -> InfSupReport {
    InfSupReport {
        beta: vals[0].max(0.0).sqrt(),
        ritz: vals,
        iterations,
        change,
    }
}

/// Modified Gram–Schmidt of `ys` in the `M` inner product, applying the
/// same column operations to `zs`. Nearly dependent columns are dropped.
fn orthonormalize(m: &CsrMatrix, ys: Vec<Vec<f64>>, zs: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut oy: Vec<Vec<f64>> = Vec::new();
    let mut oz: Vec<Vec<f64>> = Vec::new();
    let mut my: Vec<Vec<f64>> = Vec::new();
    for (mut y, mut z) in ys.into_iter().zip(zs) {
        let n0 = vec_dot(&y, &m.mul_vec(&y)).sqrt();
        for _ in 0..2 {
            for ((qy, qz), mq) in oy.iter().zip(&oz).zip(&my) {
                let c = vec_dot(mq, &y);
                y.iter_mut().zip(qy).for_each(|(a, b)| *a -= c * b);
                z.iter_mut().zip(qz).for_each(|(a, b)| *a -= c * b);
            }
        }
        let my_new = m.mul_vec(&y);
        let n = vec_dot(&y, &my_new).sqrt();
        if !(n > 1e-10 * n0) {
            continue;
        }
        y.iter_mut().for_each(|v| *v /= n);
        z.iter_mut().for_each(|v| *v /= n);
        my.push(my_new.iter().map(|v| v / n).collect());
        oy.push(y);
        oz.push(z);
    }
    (oy, oz)
}
