//! Nonlinear driver: damped Newton with a relaxed Picard fallback, and
//! continuation in the mollification index for multivalued laws.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::assemble::{AssembledOperator, Force, Linearization};
use super::forms::Convection;
use crate::constitutive::{GraphLaw, MollifiedLaw, StressModel};
use crate::elements::SpacePair;
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, SparseLu};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub convection: Convection,
    /// Mollification index. Multivalued laws always use mollified
    /// stresses; single-valued laws only when this is set.
    pub n_mollify: Option<u32>,
    /// Solve `n = n_start, 2·n_start, …, n_max` with warm starts.
    pub continuation: bool,
    pub n_start: u32,
    pub n_max: u32,
    /// Relative tolerance on the algebraic residual 2-norm.
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Relaxation of the Picard fallback step.
    pub picard_relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            convection: Convection::None,
            n_mollify: None,
            continuation: true,
            n_start: 4,
            n_max: 64,
            newton_tol: 1e-10,
            max_iter: 100,
            picard_relaxation: 0.5,
        }
    }
}

/// Converged discrete velocity and pressure with solver diagnostics.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub u: Vec<f64>,
    /// Mean-zero pressure.
    pub p: Vec<f64>,
    /// Mollification index of the final stage (`None`: raw selection).
    pub n_mollify: Option<u32>,
    /// Residual norm before every iteration, over all stages.
    pub history: Vec<f64>,
    /// `‖(⟨div U, Q⟩)_Q‖₂`.
    pub constraint_residual: f64,
    /// `|∫P| / ‖P‖₁`-style relative mean (zero up to round-off).
    pub pressure_mean: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub picard_steps: usize,
    pub elapsed: Duration,
}

impl DiscreteSolution {
    /// Stress model the solution satisfies the discrete equations for.
    pub fn model(&self, law: &GraphLaw) -> StressModel {
        model_for(law, self.n_mollify)
    }
}

pub fn model_for(law: &GraphLaw, n: Option<u32>) -> StressModel {
    match n {
        Some(n) => StressModel::Mollified(MollifiedLaw::new(*law, n)),
        None => StressModel::Selection(*law),
    }
}

/// Lower bound on `r` for which the discrete problem is known to be
/// solvable with the pair's convection form: `2d/(d+1)` in general and
/// `2d/(d+2)` for exactly divergence-free pairs.
pub fn exponent_threshold(pair_divergence_free: bool, dim: usize) -> f64 {
    let d = dim as f64;
    if pair_divergence_free {
        2.0 * d / (d + 2.0)
    } else {
        2.0 * d / (d + 1.0)
    }
}

pub fn check_exponent(pair: &SpacePair, law: &GraphLaw) -> Result<()> {
    let bound = exponent_threshold(pair.kind().divergence_free(), pair.dim());
    if law.r() <= bound {
        return Err(Error::Validation(format!(
            "exponent r = {} must exceed {bound:.6} for `{}` in dimension {}",
            law.r(),
            pair.kind().name(),
            pair.dim()
        )));
    }
    Ok(())
}

/// Mollification indices visited by the driver.
pub fn stages(law: &GraphLaw, opts: &SolverOptions) -> Result<Vec<Option<u32>>> {
    let needs_mollifier = !law.is_single_valued();
    if !needs_mollifier && opts.n_mollify.is_none() {
        return Ok(vec![None]);
    }
    if opts.n_start == 0 || opts.n_max == 0 {
        return Err(Error::invalid("mollification indices must be positive"));
    }
    if let (Some(n), false) = (opts.n_mollify, opts.continuation) {
        return Ok(vec![Some(n.max(1))]);
    }
    let n_max = opts.n_mollify.unwrap_or(opts.n_max);
    let mut out = Vec::new();
    let mut n = opts.n_start.min(n_max);
    while n < n_max {
        out.push(Some(n));
        n *= 2;
    }
    out.push(Some(n_max));
    Ok(out)
}

/// Solves the Galerkin system for `(U, P)`.
pub fn solve(pair: &SpacePair, law: &GraphLaw, force: &Force<'_>, opts: &SolverOptions) -> Result<DiscreteSolution> {
    check_exponent(pair, law)?;
    if law.dim != pair.dim() {
        return Err(Error::invalid("law and mesh dimensions differ"));
    }
    let op = AssembledOperator::new(pair, force, opts.convection, None)?;
    solve_with(&op, law, opts, None)
}

/// As [`solve`] with a prebuilt operator and an optional initial guess
/// `[U, P, s]`.
pub fn solve_with(
    op: &AssembledOperator<'_>,
    law: &GraphLaw,
    opts: &SolverOptions,
    initial: Option<&[f64]>,
) -> Result<DiscreteSolution> {
    let start = Instant::now();
    let plan = stages(law, opts)?;
    let n = op.num_unknowns();
    let first = model_for(law, plan[0]);

    let mut x = match initial {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::invalid("initial guess has the wrong length")),
        None => stokes_guess(op, &first)?,
    };

    let mut stats = Stats::default();
    for (k, &stage) in plan.iter().enumerate() {
        let model = if k == 0 { first.clone() } else { model_for(law, stage) };
        newton(op, &model, &mut x, opts, &mut stats)?;
    }

    let (nv, np) = (op.pair().num_velocity(), op.pair().num_pressure());
    let u = x[..nv].to_vec();
    let p = x[nv..nv + np].to_vec();
    let constraint_residual = vec_norm(&op.divergence().mul_vec(&u));
    let mean: f64 = crate::linalg::vec_dot(op.pressure_integrals(), &p);
    let abs: f64 = op
        .pressure_integrals()
        .iter()
        .zip(&p)
        .map(|(m, v)| m * v.abs())
        .sum();
    Ok(DiscreteSolution {
        u,
        p,
        n_mollify: *plan.last().expect("at least one stage"),
        history: stats.history,
        constraint_residual,
        pressure_mean: if abs > 0.0 { mean.abs() / abs } else { 0.0 },
        iterations: stats.newton + stats.picard,
        newton_steps: stats.newton,
        picard_steps: stats.picard,
        elapsed: start.elapsed(),
    })
}

#[derive(Default)]
struct Stats {
    history: Vec<f64>,
    newton: usize,
    picard: usize,
}

/// Linear Stokes solve with the secant viscosity of the law at `|D| = 1`.
fn stokes_guess(op: &AssembledOperator<'_>, model: &StressModel) -> Result<Vec<f64>> {
    let g0 = model.profile(1.0).0;
    let g0 = if g0.is_finite() && g0 > 0.0 { g0 } else { 1.0 };
    let n = op.num_unknowns();
    let x0 = vec![0.0; n];
    let (_, k) = op.linearize(model, &x0, Linearization::Stokes(g0));
    let mut rhs = vec![0.0; n];
    rhs[..op.load().len()].copy_from_slice(op.load());
    SparseLu::new(&k)?.solve(&rhs)
}

fn newton(
    op: &AssembledOperator<'_>,
    model: &StressModel,
    x: &mut [f64],
    opts: &SolverOptions,
    stats: &mut Stats,
) -> Result<()> {
    let scale = vec_norm(op.load()).max(1.0);
    let target = opts.newton_tol * scale;
    for _ in 0..opts.max_iter {
        let (r, jac) = op.linearize(model, x, Linearization::Newton);
        let rn = vec_norm(&r);
        stats.history.push(rn);
        if !rn.is_finite() {
            return Err(Error::NumericalFailure {
                message: "residual is not finite".into(),
                history: stats.history.clone(),
            });
        }
        if rn <= target {
            return Ok(());
        }
        if let Some(xt) = newton_step(op, model, x, &r, rn, &jac) {
            x.copy_from_slice(&xt);
            stats.newton += 1;
            continue;
        }
        // relaxed Kačanov step: x ← x − ω J_P⁻¹ R
        let (_, jp) = op.linearize(model, x, Linearization::Picard);
        let dx = SparseLu::new(&jp)
            .and_then(|lu| lu.solve(&r))
            .map_err(|e| Error::NumericalFailure {
                message: format!("Picard fallback failed: {e}"),
                history: stats.history.clone(),
            })?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= opts.picard_relaxation * di;
        }
        stats.picard += 1;
    }
    let last = op.residual(model, x);
    let rn = vec_norm(&last);
    stats.history.push(rn);
    if rn <= target {
        return Ok(());
    }
    Err(Error::NumericalFailure {
        message: format!(
            "no convergence after {} iterations (residual {rn:.3e}, target {target:.3e})",
            opts.max_iter
        ),
        history: stats.history.clone(),
    })
}

/// Backtracking Newton step; `None` if the direction gives no decrease.
fn newton_step(
    op: &AssembledOperator<'_>,
    model: &StressModel,
    x: &[f64],
    r: &[f64],
    rn: f64,
    jac: &crate::linalg::CsrMatrix,
) -> Option<Vec<f64>> {
    let dx = SparseLu::new(jac).ok()?.solve(r).ok()?;
    let mut alpha = 1.0;
    for _ in 0..8 {
        let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - alpha * d).collect();
        let rt = vec_norm(&op.residual(model, &xt));
        if rt.is_finite() && rt < (1.0 - 1e-4 * alpha) * rn {
            return Some(xt);
        }
        alpha *= 0.5;
    }
    None
}
