//! The discrete problem: convection forms, assembly, the nonlinear solver,
//! the discrete Bogovskiĭ operator, the inf-sup estimator and diagnostics.

mod assemble;
mod bogovskii;
pub mod diagnostics;
mod forms;
mod infsup;
mod solve;

pub use assemble::{assemble_residual, load_vector, AssembledOperator, Force, Linearization};
pub use bogovskii::{discrete_bogovskii, h1_norm, Bogovskii, BogovskiiResult};
pub use diagnostics::{an_diagnostic, r_tilde, solution_errors, solution_norms, AnReport, ErrorNorms, SolutionNorms};
pub use forms::{divergence_correction, trilinear, trilinear_divfree, trilinear_skew, Convection};
pub use infsup::{inf_sup_constant, InfSupReport};
pub use solve::{
    check_exponent, exponent_threshold, model_for, solve, solve_with, stages, DiscreteSolution, SolverOptions,
};
