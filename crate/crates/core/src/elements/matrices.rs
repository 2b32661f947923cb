//! Sparse matrices shared by the projectors, the solver and the inf-sup
//! estimator. Cell contributions are computed in parallel and reduced in
//! cell order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::{SpacePair, CONSTRAINED, MAX_LOCAL};
use crate::linalg::{ddot, dot, trace, CsrMatrix, TripletBuilder, ZERO3, ZERO33};
use crate::quadrature::SimplexRule;

/// Runs `f` on every cell in parallel and returns the results in cell order.
pub(crate) fn per_cell<T: Send>(ncells: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    (0..ncells).into_par_iter().map(|c| f(c)).collect()
}

type Local = Vec<(usize, usize, f64)>;

fn reduce(nrows: usize, ncols: usize, locals: Vec<Local>) -> CsrMatrix {
    let mut t = TripletBuilder::new(nrows, ncols);
    for l in locals {
        for (r, c, v) in l {
            t.push(r, c, v);
        }
    }
    t.into_csr()
}

impl SpacePair {
    /// H¹ Gram matrix `∫ ∇u:∇v + u·v` on the free velocity DOFs.
    pub fn velocity_gram(&self, rule: &SimplexRule) -> CsrMatrix {
        let tri = self.mesh();
        let nl = self.velocity_local();
        let locals = per_cell(tri.num_cells(), |c| {
            let dofs = self.velocity_dofs(c);
            let mut vals = [ZERO3; MAX_LOCAL];
            let mut grads = [ZERO33; MAX_LOCAL];
            let mut k = vec![0.0; nl * nl];
            for q in 0..rule.len() {
                let w = rule.weights[q] * tri.measure(c);
                self.eval_velocity(c, &rule.bary[q], &mut vals, &mut grads);
                for a in 0..nl {
                    for b in a..nl {
                        let v = w * (ddot(&grads[a], &grads[b]) + dot(&vals[a], &vals[b]));
                        k[a * nl + b] += v;
                    }
                }
            }
            let mut out = Local::new();
            for a in 0..nl {
                for b in 0..nl {
                    let (i, j) = (dofs[a], dofs[b]);
                    if i != CONSTRAINED && j != CONSTRAINED {
                        out.push((i, j, k[a.min(b) * nl + a.max(b)]));
                    }
                }
            }
            out
        });
        reduce(self.num_velocity(), self.num_velocity(), locals)
    }

    /// `B[q][v] = ∫ (div φ_v) ψ_q`.
    pub fn divergence_matrix(&self, rule: &SimplexRule) -> CsrMatrix {
        let tri = self.mesh();
        let nl = self.velocity_local();
        let np = self.pressure_local();
        let locals = per_cell(tri.num_cells(), |c| {
            let dofs = self.velocity_dofs(c);
            let pdofs = self.pressure_dofs(c);
            let mut vals = [ZERO3; MAX_LOCAL];
            let mut grads = [ZERO33; MAX_LOCAL];
            let mut pv = [0.0; 4];
            let mut k = vec![0.0; np * nl];
            for q in 0..rule.len() {
                let w = rule.weights[q] * tri.measure(c);
                self.eval_velocity(c, &rule.bary[q], &mut vals, &mut grads);
                self.eval_pressure(&rule.bary[q], &mut pv);
                for a in 0..nl {
                    let div = trace(&grads[a]);
                    for p in 0..np {
                        k[p * nl + a] += w * div * pv[p];
                    }
                }
            }
            let mut out = Local::new();
            for p in 0..np {
                for a in 0..nl {
                    if dofs[a] != CONSTRAINED {
                        out.push((pdofs[p], dofs[a], k[p * nl + a]));
                    }
                }
            }
            out
        });
        reduce(self.num_pressure(), self.num_velocity(), locals)
    }

    /// Pressure mass matrix `∫ ψ_p ψ_q`.
    pub fn pressure_mass(&self, rule: &SimplexRule) -> CsrMatrix {
        let tri = self.mesh();
        let np = self.pressure_local();
        let locals = per_cell(tri.num_cells(), |c| {
            let pdofs = self.pressure_dofs(c);
            let mut pv = [0.0; 4];
            let mut k = [[0.0; 4]; 4];
            for q in 0..rule.len() {
                let w = rule.weights[q] * tri.measure(c);
                self.eval_pressure(&rule.bary[q], &mut pv);
                for a in 0..np {
                    for b in 0..np {
                        k[a][b] += w * pv[a] * pv[b];
                    }
                }
            }
            let mut out = Local::new();
            for a in 0..np {
                for b in 0..np {
                    out.push((pdofs[a], pdofs[b], k[a][b]));
                }
            }
            out
        });
        reduce(self.num_pressure(), self.num_pressure(), locals)
    }

    /// `∫ ψ_q` for every pressure basis function.
    pub fn pressure_integrals(&self) -> Vec<f64> {
        let tri = self.mesh();
        let mut m = vec![0.0; self.num_pressure()];
        let share = 1.0 / self.pressure_local() as f64;
        for c in 0..tri.num_cells() {
            for &d in self.pressure_dofs(c) {
                m[d] += share * tri.measure(c);
            }
        }
        m
    }
}

/// Factorized KKT system for `min ½ wᵀMw` subject to `Bw = g`, with a scalar
/// multiplier removing the constant-pressure kernel of `Bᵀ`:
///
/// ```text
/// [ M  Bᵀ 0 ] [w]   [f]
/// [ B  0  m ] [μ] = [g]
/// [ 0  mᵀ 0 ] [s]   [0]
/// ```
pub struct ConstrainedSolver {
    nv: usize,
    np: usize,
    lu: crate::linalg::SparseLu,
}

impl ConstrainedSolver {
    pub fn new(m: &CsrMatrix, b: &CsrMatrix, mean: &[f64]) -> crate::error::Result<Self> {
        let (nv, np) = (m.nrows, b.nrows);
        let mut t = TripletBuilder::new(nv + np + 1, nv + np + 1);
        t.push_block(m, 0, 0, 1.0);
        t.push_block(b, nv, 0, 1.0);
        t.push_block_transposed(b, 0, nv, 1.0);
        for (q, &v) in mean.iter().enumerate() {
            t.push(nv + q, nv + np, v);
            t.push(nv + np, nv + q, v);
        }
        let lu = crate::linalg::SparseLu::new(&t.into_csr())?;
        Ok(Self { nv, np, lu })
    }

    /// Returns `(w, μ)`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> crate::error::Result<(Vec<f64>, Vec<f64>)> {
        let mut rhs = vec![0.0; self.nv + self.np + 1];
        rhs[..self.nv].copy_from_slice(f);
        rhs[self.nv..self.nv + self.np].copy_from_slice(g);
        let x = self.lu.solve(&rhs)?;
        Ok((x[..self.nv].to_vec(), x[self.nv..self.nv + self.np].to_vec()))
    }
}
