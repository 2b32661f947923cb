//! Discrete right inverse of the divergence: the minimum-H¹-norm velocity
//! with prescribed discrete divergence.

use serde::Serialize;

use crate::elements::{ConstrainedSolver, SpacePair};
use crate::error::{Error, Result};
use crate::linalg::{vec_dot, CsrMatrix};

/// Factorized operator; reusable for many data on one pair.
pub struct Bogovskii<'a> {
    pair: &'a SpacePair,
    gram: CsrMatrix,
    b: CsrMatrix,
    mq: CsrMatrix,
    solver: ConstrainedSolver,
}

#[derive(Debug, Clone, Serialize)]
pub struct BogovskiiResult {
    pub w: Vec<f64>,
    /// `max_Q |⟨div W − H, Q⟩| / max_Q |⟨H, Q⟩|` over basis functions.
    pub residual: f64,
    /// `‖W‖_{1,2} / ‖H‖₂`.
    pub stability: f64,
}

impl<'a> Bogovskii<'a> {
    pub fn new(pair: &'a SpacePair) -> Result<Self> {
        let rule = pair.default_rule();
        let gram = pair.velocity_gram(&rule);
        let b = pair.divergence_matrix(&rule);
        let mq = pair.pressure_mass(&rule);
        let solver = ConstrainedSolver::new(&gram, &b, &pair.pressure_integrals())?;
        Ok(Self {
            pair,
            gram,
            b,
            mq,
            solver,
        })
    }

    /// `W` with `⟨div W, Q⟩ = ⟨H, Q⟩` for all discrete `Q`, where `H` is a
    /// discrete pressure given by its coefficients. `H` must have zero mean.
    pub fn apply(&self, h: &[f64]) -> Result<BogovskiiResult> {
        if h.len() != self.pair.num_pressure() {
            return Err(Error::invalid("datum does not match the pressure space"));
        }
        let g = self.mq.mul_vec(h);
        let gmax = crate::linalg::vec_max_abs(&g);
        if gmax == 0.0 {
            return Ok(BogovskiiResult {
                w: vec![0.0; self.pair.num_velocity()],
                residual: 0.0,
                stability: 0.0,
            });
        }
        let (w, _) = self.solver.solve(&vec![0.0; self.pair.num_velocity()], &g)?;
        let bw = self.b.mul_vec(&w);
        let residual = bw
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / gmax;
        if residual > 1e-8 {
            return Err(Error::Infeasible(format!(
                "datum is not a discrete divergence (relative mismatch {residual:.3e}); \
                 it must have zero mean and lie in div V"
            )));
        }
        let w_norm = vec_dot(&w, &self.gram.mul_vec(&w)).sqrt();
        let h_norm = vec_dot(h, &g).sqrt();
        Ok(BogovskiiResult {
            stability: w_norm / h_norm,
            w,
            residual,
        })
    }

    /// Discrete divergence datum of a velocity: the pressure `H` with
    /// `⟨H, Q⟩ = ⟨div V, Q⟩`, i.e. `H = M_Q⁻¹ B V`.
    pub fn divergence_of(&self, v: &[f64]) -> Result<Vec<f64>> {
        crate::linalg::SparseLu::new(&self.mq)?.solve(&self.b.mul_vec(v))
    }
}

/// One-shot [`Bogovskii::apply`].
pub fn discrete_bogovskii(pair: &SpacePair, h: &[f64]) -> Result<BogovskiiResult> {
    Bogovskii::new(pair)?.apply(h)
}

/// Norm of `v` in the velocity Gram inner product; helper for callers
/// comparing against [`BogovskiiResult::stability`].
pub fn h1_norm(pair: &SpacePair, v: &[f64]) -> f64 {
    let gram = pair.velocity_gram(&pair.default_rule());
    vec_dot(v, &gram.mul_vec(v)).sqrt()
}
