use std::collections::HashMap;
use std::sync::Arc;

use monoflow_core::constitutive::{GraphLaw, LawKind, StressModel};
use monoflow_core::elements::{PairKind, SpacePair};
use monoflow_core::manufactured::Manufactured;
use monoflow_core::mesh::{BoxDomain, Triangulation};
use monoflow_core::system::*;
use monoflow_core::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n).unwrap())
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn newtonian() -> GraphLaw {
    GraphLaw::new(LawKind::Newtonian { mu: 0.5 }, 2).unwrap()
}

// --- polynomial oracle in barycentric coordinates ------------------------

#[derive(Clone, Default)]
struct Poly(HashMap<[u32; 3], f64>);

impl Poly {
    fn mono(e: [u32; 3], c: f64) -> Self {
        Poly(HashMap::from([(e, c)]))
    }
    fn add(&mut self, o: &Poly, s: f64) {
        for (e, c) in &o.0 {
            *self.0.entry(*e).or_default() += s * c;
        }
    }
    fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ea, ca) in &self.0 {
            for (eb, cb) in &o.0 {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                *out.0.entry(e).or_default() += ca * cb;
            }
        }
        out
    }
    fn d(&self, k: usize) -> Poly {
        let mut out = Poly::default();
        for (e, c) in &self.0 {
            if e[k] > 0 {
                let mut f = *e;
                f[k] -= 1;
                *out.0.entry(f).or_default() += c * e[k] as f64;
            }
        }
        out
    }
    /// `∫_E` with `∫ λ^α = 2 α! |E| / (|α| + 2)!`.
    fn integrate(&self, area: f64) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        self.0
            .iter()
            .map(|(e, c)| c * 2.0 * fact(e[0]) * fact(e[1]) * fact(e[2]) / fact(e[0] + e[1] + e[2] + 2))
            .sum::<f64>()
            * area
    }
}

/// Mini velocity on one cell as barycentric polynomials, with physical
/// gradients of the barycentric coordinates.
fn mini_cell(pair: &SpacePair, u: &[f64], c: usize) -> ([Poly; 2], [[f64; 2]; 3], f64) {
    let tri = pair.mesh();
    let v: Vec<_> = tri.cell(c).iter().map(|&i| tri.vertex(i)).collect();
    let (a, b) = ([v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]);
    let det = a[0] * b[1] - a[1] * b[0];
    // ∇λ1, ∇λ2 from the inverse Jacobian, ∇λ0 = −∇λ1 − ∇λ2
    let g1 = [b[1] / det, -a[1] / det];
    let g2 = [-b[0] / det, a[0] / det];
    let g = [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2];
    let basis = [
        Poly::mono([1, 0, 0], 1.0),
        Poly::mono([0, 1, 0], 1.0),
        Poly::mono([0, 0, 1], 1.0),
        Poly::mono([1, 1, 1], 27.0),
    ];
    let dofs = pair.velocity_dofs(c);
    let mut comps = [Poly::default(), Poly::default()];
    for comp in 0..2 {
        for k in 0..4 {
            let d = dofs[comp * 4 + k];
            if d != monoflow_core::elements::CONSTRAINED {
                comps[comp].add(&basis[k], u[d]);
            }
        }
    }
    (comps, g, det.abs() / 2.0)
}

fn grad(p: &Poly, g: &[[f64; 2]; 3], j: usize) -> Poly {
    let mut out = Poly::default();
    for k in 0..3 {
        out.add(&p.d(k), g[k][j]);
    }
    out
}

fn oracle_skew(pair: &SpacePair, v: &[f64], w: &[f64], h: &[f64]) -> f64 {
    let mut total = 0.0;
    for c in 0..pair.mesh().num_cells() {
        let (vp, g, area) = mini_cell(pair, v, c);
        let (wp, _, _) = mini_cell(pair, w, c);
        let (hp, _, _) = mini_cell(pair, h, c);
        let mut integrand = Poly::default();
        for i in 0..2 {
            for j in 0..2 {
                integrand.add(&hp[i].mul(&vp[j]).mul(&grad(&wp[i], &g, j)), 0.5);
                integrand.add(&wp[i].mul(&vp[j]).mul(&grad(&hp[i], &g, j)), -0.5);
            }
        }
        total += integrand.integrate(area);
    }
    total
}

#[test]
fn skew_form_matches_exact_polynomial_integration() {
    let pair = SpacePair::new(square(2), PairKind::Mini).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let n = pair.num_velocity();
        let (v, w, h) = (random_vec(n, &mut rng), random_vec(n, &mut rng), random_vec(n, &mut rng));
        let got = trilinear_skew(&pair, &v, &w, &h).unwrap();
        let want = oracle_skew(&pair, &v, &w, &h);
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn forms_differ_by_divergence_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in PairKind::ALL {
        let pair = SpacePair::new(square(3), kind).unwrap();
        let n = pair.num_velocity();
        let (v, w, h) = (random_vec(n, &mut rng), random_vec(n, &mut rng), random_vec(n, &mut rng));
        let skew = trilinear_skew(&pair, &v, &w, &h).unwrap();
        let div = trilinear_divfree(&pair, &v, &w, &h).unwrap();
        let corr = divergence_correction(&pair, &v, &w, &h).unwrap();
        let scale = skew.abs().max(div.abs()).max(1.0);
        assert!((div - skew - corr).abs() < 1e-12 * scale, "{kind:?} {}", (div - skew - corr).abs() / scale);
        let swapped = trilinear_skew(&pair, &v, &h, &w).unwrap();
        assert!((skew + swapped).abs() < 1e-12 * scale);
    }
}

#[test]
fn mismatched_lengths_are_rejected() {
    let pair = SpacePair::new(square(2), PairKind::Mini).unwrap();
    let v = vec![0.0; pair.num_velocity()];
    assert!(matches!(
        trilinear_skew(&pair, &v, &v, &v[1..]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn divfree_form_vanishes_on_solenoidal_fields() {
    let pair = SpacePair::new(square(4), PairKind::GuzmanNeilan).unwrap();
    let bog = Bogovskii::new(&pair).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_vec(pair.num_velocity(), &mut rng);
    let h = bog.divergence_of(&v).unwrap();
    let w = bog.apply(&h).unwrap().w;
    let s: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    let b3 = trilinear_divfree(&pair, &s, &s, &s).unwrap();
    let n = h1_norm(&pair, &s);
    assert!(b3.abs() <= 1e-11 * n.powi(3), "{b3} {}", n);
    let skew = trilinear_skew(&pair, &s, &s, &s).unwrap();
    assert!((b3 - skew).abs() <= 1e-11 * n.powi(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn skew_form_vanishes_on_diagonal(seed in 0u64..10_000, kind in 0usize..5) {
        let pair = SpacePair::new(square(2), PairKind::ALL[kind]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vec(pair.num_velocity(), &mut rng);
        let b = trilinear_skew(&pair, &v, &v, &v).unwrap();
        let n = h1_norm(&pair, &v);
        prop_assert!(b.abs() <= 1e-12 * n.powi(3));
    }
}

#[test]
fn zero_data_gives_zero_solution_and_residual() {
    let pair = SpacePair::new(square(4), PairKind::Mini).unwrap();
    let law = GraphLaw::new(LawKind::PowerLaw { mu: 1.0, r: 3.0 }, 2).unwrap();
    let zero = |_: &[f64; 3]| [0.0; 3];
    let (m, c) = assemble_residual(
        &pair,
        &StressModel::Selection(law),
        &vec![0.0; pair.num_velocity()],
        &vec![0.0; pair.num_pressure()],
        &zero,
        Convection::Skew,
    )
    .unwrap();
    assert!(m.iter().chain(&c).all(|&v| v == 0.0));
    let sol = solve(&pair, &law, &zero, &SolverOptions::default()).unwrap();
    assert!(sol.u.iter().chain(&sol.p).all(|&v| v == 0.0));
}

#[test]
fn pressure_drops_out_against_discrete_kernel() {
    let pair = SpacePair::new(square(4), PairKind::P2P0).unwrap();
    let bog = Bogovskii::new(&pair).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = random_vec(pair.num_velocity(), &mut rng);
    let w = bog.apply(&bog.divergence_of(&v).unwrap()).unwrap().w;
    let kernel: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    let u = random_vec(pair.num_velocity(), &mut rng);
    let p = random_vec(pair.num_pressure(), &mut rng);
    let f = |x: &[f64; 3]| [x[1], -x[0], 0.0];
    let model = StressModel::Selection(newtonian());
    let (with_p, _) = assemble_residual(&pair, &model, &u, &p, &f, Convection::Skew).unwrap();
    let (without, _) =
        assemble_residual(&pair, &model, &u, &vec![0.0; p.len()], &f, Convection::Skew).unwrap();
    let dot = |a: &[f64]| a.iter().zip(&kernel).map(|(x, y)| x * y).sum::<f64>();
    let scale = dot(&without).abs().max(1.0);
    assert!((dot(&with_p) - dot(&without)).abs() < 1e-10 * scale);
}

#[test]
fn consistency_residual_decreases() {
    let law = newtonian();
    let m = Manufactured::new(law, 10.0, false);
    let f = |x: &[f64; 3]| m.force(x);
    let mut prev = f64::INFINITY;
    for n in [4, 8, 16] {
        let pair = SpacePair::new(square(n), PairKind::CrouzeixRaviartConforming).unwrap();
        let proj = monoflow_core::elements::ProjectorPair::new(&pair).unwrap();
        let u = proj.project_field(&pair, &m).unwrap();
        let tri = pair.mesh();
        let p = proj
            .project_pressure(&pair, &|c, lam| m.pressure(&tri.point(c, lam)))
            .unwrap();
        let (r, _) =
            assemble_residual(&pair, &StressModel::Selection(law), &u, &p, &f, Convection::None).unwrap();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < prev, "{n}: {norm} vs {prev}");
        prev = norm;
    }
}

#[test]
fn newtonian_stokes_converges_and_satisfies_identities() {
    let law = newtonian();
    let m = Manufactured::new(law, 10.0, false);
    let f = |x: &[f64; 3]| m.force(x);
    let mut prev = f64::INFINITY;
    for n in [4, 8, 16] {
        let pair = SpacePair::new(square(n), PairKind::Mini).unwrap();
        let sol = solve(&pair, &law, &f, &SolverOptions::default()).unwrap();
        let e = solution_errors(&pair, &sol.u, &sol.p, &m, &|x| m.pressure(x), 2.0, 2.0);
        assert!(e.velocity_h1 < prev);
        prev = e.velocity_h1;
        assert!(sol.constraint_residual < 1e-10);
        assert!(sol.pressure_mean < 1e-12);
        // energy: ∫S(DU):DU = ⟨f, U⟩
        let op = AssembledOperator::new(&pair, &f, Convection::None, None).unwrap();
        let a = op.nonlinear_part(&StressModel::Selection(law), &sol.u);
        let lhs: f64 = a.iter().zip(&sol.u).map(|(x, y)| x * y).sum();
        let rhs: f64 = op.load().iter().zip(&sol.u).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
    }
}

#[test]
fn navier_stokes_with_skew_convection_converges() {
    let law = GraphLaw::new(LawKind::PowerLaw { mu: 0.5, r: 2.5 }, 2).unwrap();
    let m = Manufactured::new(law, 20.0, true);
    let f = |x: &[f64; 3]| m.force(x);
    let opts = SolverOptions {
        convection: Convection::Skew,
        ..Default::default()
    };
    let pair = SpacePair::new(square(8), PairKind::P2P0).unwrap();
    let sol = solve(&pair, &law, &f, &opts).unwrap();
    assert!(*sol.history.last().unwrap() <= 1e-10 * sol.history[0].max(1.0) || sol.history.len() < 30);
    let e = solution_errors(&pair, &sol.u, &sol.p, &m, &|x| m.pressure(x), 2.5, r_tilde(2.5, 2));
    assert!(e.velocity_h1 < 0.2 * h1_norm(&pair, &sol.u));
}

#[test]
fn bingham_solve_runs_continuation() {
    let law = GraphLaw::new(LawKind::Bingham { mu: 0.5, tau: 0.2 }, 2).unwrap();
    let f = |x: &[f64; 3]| [10.0 * (x[1] - 0.5), -10.0 * (x[0] - 0.5), 0.0];
    let opts = SolverOptions {
        n_max: 16,
        ..Default::default()
    };
    let pair = SpacePair::new(square(6), PairKind::Mini).unwrap();
    let sol = solve(&pair, &law, &f, &opts).unwrap();
    assert_eq!(sol.n_mollify, Some(16));
    assert_eq!(stages(&law, &opts).unwrap(), vec![Some(4), Some(8), Some(16)]);
}

#[test]
fn exponent_thresholds_are_enforced() {
    let f = |_: &[f64; 3]| [0.0; 3];
    let low = GraphLaw::new(LawKind::PowerLaw { mu: 1.0, r: 1.3 }, 2).unwrap();
    let mini = SpacePair::new(square(2), PairKind::Mini).unwrap();
    assert!(matches!(
        solve(&mini, &low, &f, &SolverOptions::default()),
        Err(Error::Validation(_))
    ));
    // 1.3 > 2d/(d+2) = 1 is admissible for the divergence-free pair
    let gn = SpacePair::new(square(2), PairKind::GuzmanNeilan).unwrap();
    assert!(solve(&gn, &low, &f, &SolverOptions::default()).is_ok());
    assert!((exponent_threshold(false, 2) - 4.0 / 3.0).abs() < 1e-15);
    assert!((exponent_threshold(false, 3) - 1.5).abs() < 1e-15);
}

#[test]
fn r_tilde_values() {
    assert_eq!(r_tilde(2.0, 2), 2.0);
    assert!((r_tilde(2.0, 3) - 2.0).abs() < 1e-15);
    assert!((r_tilde(4.0 / 3.0, 2) - 2.0).abs() < 1e-12);
}

#[test]
fn bogovskii_feasibility_and_zero_datum() {
    let pair = SpacePair::new(square(4), PairKind::Mini).unwrap();
    let bog = Bogovskii::new(&pair).unwrap();
    let zero = bog.apply(&vec![0.0; pair.num_pressure()]).unwrap();
    assert!(zero.w.iter().all(|&v| v == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_vec(pair.num_velocity(), &mut rng);
    let h = bog.divergence_of(&v).unwrap();
    let res = bog.apply(&h).unwrap();
    assert!(res.residual < 1e-10);
    // minimum norm: never larger than the datum's own preimage
    assert!(h1_norm(&pair, &res.w) <= h1_norm(&pair, &v) * (1.0 + 1e-12));
    let ones = vec![1.0; pair.num_pressure()];
    assert!(matches!(bog.apply(&ones), Err(Error::Infeasible(_))));
}

/// Dense oracle: smallest nonzero eigenvalue of `L⁻¹ B M⁻¹ Bᵀ L⁻ᵀ` with
/// `M_Q = L Lᵀ`.
fn dense_beta(pair: &SpacePair) -> f64 {
    let rule = pair.default_rule();
    let to = |m: monoflow_core::linalg::CsrMatrix| {
        let d = m.to_dense();
        DMatrix::from_fn(d.len(), d[0].len(), |i, j| d[i][j])
    };
    let mv = to(pair.velocity_gram(&rule));
    let b = to(pair.divergence_matrix(&rule));
    let mq = to(pair.pressure_mass(&rule));
    let s = &b * mv.clone().try_inverse().unwrap() * b.transpose();
    let l = mq.cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let c = &li * s * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    assert!(vals[0].abs() < 1e-10, "constants must be in the kernel: {}", vals[0]);
    vals[1].sqrt()
}

#[test]
fn inf_sup_matches_dense_oracle() {
    for kind in [PairKind::Mini, PairKind::P2P0, PairKind::GuzmanNeilan] {
        let pair = SpacePair::new(square(4), kind).unwrap();
        let rep = inf_sup_constant(&pair).unwrap();
        let want = dense_beta(&pair);
        assert!((rep.beta - want).abs() < 1e-6 * want, "{kind:?}: {} vs {want}", rep.beta);
    }
}

#[test]
fn an_vanishes_for_exact_coincidence() {
    // u = 0 reproduced exactly
    let pair = SpacePair::new(square(4), PairKind::Mini).unwrap();
    let law = GraphLaw::new(LawKind::PowerLaw { mu: 1.0, r: 3.0 }, 2).unwrap();
    let zero = monoflow_core::elements::FnField::new(|_: &[f64; 3]| [0.0; 3], |_: &[f64; 3]| [[0.0; 3]; 3]);
    let rep = an_diagnostic(
        &pair,
        &StressModel::Selection(law),
        &law,
        &vec![0.0; pair.num_velocity()],
        &zero,
        &[1e-3],
        &[0.5],
    );
    assert_eq!(rep.integrals[0].1, 0.0);
    assert_eq!(rep.exceedance[0].1, 0.0);
}
