//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (visible with `--nocapture`) and then asserts. Tests hold a shared lock
//! so runtime budgets are measured without contention.

use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use monoflow_core::constitutive::{GraphLaw, LawKind};
use monoflow_core::elements::{FnField, PairKind, ProjectorPair, SpacePair, VectorField};
use monoflow_core::harness::{
    graph_check, run_infsup, run_study, run_truncation_demo, DomainKind, LawConfig, ReferenceKind, StudyConfig,
    StudyReport, StudyRow, TruncationDemo, BOUNDS_TOL, IDENTITY_TOL, PHI_TOL,
};
use monoflow_core::linalg::{Mat3, Vec3, ZERO33};
use monoflow_core::mesh::{BoxDomain, Triangulation};
use monoflow_core::system::{divergence_correction, h1_norm, trilinear_divfree, trilinear_skew, Bogovskii};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n).unwrap())
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn pairs_2d() -> impl Iterator<Item = PairKind> {
    PairKind::ALL.into_iter().filter(|k| k.supported(2))
}

fn all_laws() -> Vec<GraphLaw> {
    [
        LawKind::Newtonian { mu: 0.5 },
        LawKind::PowerLaw { mu: 0.5, r: 1.5 },
        LawKind::PowerLaw { mu: 0.5, r: 3.0 },
        LawKind::StressPowerLaw { alpha: 1.0, r: 2.5 },
        LawKind::ShearStress { mu: 0.5, r: 1.8 },
        LawKind::Bingham { mu: 0.5, tau: 0.3 },
        LawKind::HerschelBulkley { mu: 0.5, tau: 0.3, r: 2.5 },
    ]
    .into_iter()
    .map(|k| GraphLaw::new(k, 2).unwrap())
    .collect()
}

// ------------------------------------------------------------------ graphs

#[test]
fn graph_axioms_and_mollified_bounds() {
    let _serial = serial();
    let mut all = true;
    for law in all_laws() {
        let t = Instant::now();
        let g = graph_check(&law, 1, 10_000, 1_000).unwrap();
        let elapsed = t.elapsed();
        let a = &g.axioms;
        let pass = a.min_monotonicity >= -1e-12
            && a.c2 > 0.0
            && g.bounds.stable(BOUNDS_TOL)
            && elapsed < Duration::from_secs(10);
        report(
            &format!("graph axioms [{}]", law.kind.name()),
            pass,
            format!(
                "monotonicity {:.3e}, c2 {:.4}, bounds variation {:.3e}, {:.2?}",
                a.min_monotonicity, a.c2, g.bounds.last_pair_variation, elapsed
            ),
        );
        all &= pass;
    }
    assert!(all);
}

#[test]
fn representation_identities_and_phi_contraction() {
    let _serial = serial();
    let mut all = true;
    for law in all_laws() {
        let id = law.check_identities(1_000, 2).unwrap();
        let phi = law.phi_lipschitz(&[0.5, 1.0, 2.0, 8.0], 3).unwrap();
        let lip = phi.iter().map(|r| r.lipschitz).fold(0.0, f64::max);
        let worst = id.phi_residual.max(id.split_residual).max(id.g_residual);
        let pass = worst <= IDENTITY_TOL && lip <= 1.0 + PHI_TOL;
        report(
            &format!("identities [{}]", law.kind.name()),
            pass,
            format!("residual {worst:.3e}, phi Lipschitz {lip:.9}"),
        );
        all &= pass;
    }
    assert!(all);
}

// ---------------------------------------------------------------- elements

/// `(a·b(x,y)·xⁱyʲ, c·…)` with `b` the unit-square bubble.
fn bubble_field(i: i32, j: i32, a: f64, c: f64) -> impl VectorField {
    let f = move |t: f64, k: i32| t * (1.0 - t) * t.powi(k);
    let df = move |t: f64, k: i32| {
        (1.0 - 2.0 * t) * t.powi(k) + if k > 0 { k as f64 * t.powi(k - 1) * t * (1.0 - t) } else { 0.0 }
    };
    FnField::new(
        move |x: &Vec3| {
            let s = f(x[0], i) * f(x[1], j);
            [a * s, c * s, 0.0]
        },
        move |x: &Vec3| -> Mat3 {
            let (fx, fy, dx, dy) = (f(x[0], i), f(x[1], j), df(x[0], i), df(x[1], j));
            let mut g = ZERO33;
            g[0] = [a * dx * fy, a * fx * dy, 0.0];
            g[1] = [c * dx * fy, c * fx * dy, 0.0];
            g
        },
    )
}

#[test]
fn projector_contracts_on_smooth_fields() {
    let _serial = serial();
    let fields: Vec<_> = (0..20)
        .map(|k| bubble_field(k % 5, k / 5, 1.0 + 0.3 * k as f64, 0.7 - 0.2 * k as f64))
        .collect();
    let refs: Vec<&dyn VectorField> = fields.iter().map(|f| f as &dyn VectorField).collect();
    let mut all = true;
    for n in [4, 8] {
        let tri = square(n);
        for kind in pairs_2d() {
            let t = Instant::now();
            let pair = SpacePair::new(tri.clone(), kind).unwrap();
            let proj = ProjectorPair::new(&pair).unwrap();
            let rep = proj.check(&pair, &refs, 7).unwrap();
            let elapsed = t.elapsed();
            let pass = rep.divergence_residual <= 1e-10
                && rep.idempotence_residual <= 1e-12
                && elapsed < Duration::from_secs(30);
            report(
                &format!("projector contracts [{} n={n}]", kind.name()),
                pass,
                format!(
                    "divergence {:.3e}, idempotence {:.3e}, {elapsed:.2?}",
                    rep.divergence_residual, rep.idempotence_residual
                ),
            );
            all &= pass;
        }
    }
    assert!(all);
}

#[test]
fn exactly_divergence_free_pair_has_pointwise_zero_divergence() {
    let _serial = serial();
    let mut all = true;
    for n in [4, 8] {
        let pair = SpacePair::new(square(n), PairKind::GuzmanNeilan).unwrap();
        let bog = Bogovskii::new(&pair).unwrap();
        let rule = pair.default_rule();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let v = random_vec(pair.num_velocity(), &mut rng);
            let w = bog.apply(&bog.divergence_of(&v).unwrap()).unwrap().w;
            let u: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
            let scale = h1_norm(&pair, &u);
            let mut max_div: f64 = 0.0;
            for c in 0..pair.mesh().num_cells() {
                for lam in &rule.bary {
                    let (_, g) = pair.velocity_at(&u, c, lam);
                    max_div = max_div.max((g[0][0] + g[1][1]).abs());
                }
            }
            worst = worst.max(max_div / scale);
        }
        let pass = worst <= 1e-11;
        report(&format!("pointwise divergence [n={n}]"), pass, format!("max |div U|/‖∇U‖ {worst:.3e}"));
        all &= pass;
    }
    assert!(all);
}

#[test]
fn convection_form_is_skew_and_forms_differ_by_divergence_term() {
    let _serial = serial();
    let mut all = true;
    for kind in pairs_2d() {
        let pair = SpacePair::new(square(4), kind).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = pair.num_velocity();
        let (mut skew, mut diff): (f64, f64) = (0.0, 0.0);
        for _ in 0..100 {
            let v = random_vec(n, &mut rng);
            let b = trilinear_skew(&pair, &v, &v, &v).unwrap();
            skew = skew.max(b.abs() / h1_norm(&pair, &v).powi(3));
        }
        for _ in 0..10 {
            let (v, w, h) = (random_vec(n, &mut rng), random_vec(n, &mut rng), random_vec(n, &mut rng));
            let a = trilinear_skew(&pair, &v, &w, &h).unwrap();
            let b = trilinear_divfree(&pair, &v, &w, &h).unwrap();
            let c = divergence_correction(&pair, &v, &w, &h).unwrap();
            diff = diff.max((b - a - c).abs() / a.abs().max(b.abs()).max(1.0));
        }
        let pass = skew <= 1e-12 && diff <= 1e-12;
        report(
            &format!("skew form [{}]", kind.name()),
            pass,
            format!("|B[V,V,V]|/‖V‖³ {skew:.3e}, form difference {diff:.3e}"),
        );
        all &= pass;
    }
    assert!(all);
}

#[test]
fn inf_sup_constant_is_mesh_independent() {
    let _serial = serial();
    let t = Instant::now();
    let sweep = run_infsup(&[PairKind::Mini, PairKind::P2P0], 4, 3).unwrap();
    let elapsed = t.elapsed();
    let positive = sweep.rows.iter().all(|r| r.beta > 0.0);
    let variation = sweep.variation.iter().map(|v| v.1).fold(0.0, f64::max);
    let pass = positive && variation < 0.2 && elapsed < Duration::from_secs(60);
    let betas: Vec<String> = sweep.rows.iter().map(|r| format!("{}@{}={:.4}", r.pair, r.n, r.beta)).collect();
    report(
        "inf-sup",
        pass,
        format!("{}; variation {:.3}, {elapsed:.2?}", betas.join(" "), variation),
    );
    assert!(pass);
}

// ------------------------------------------------------------------ studies

fn study_config(pair: PairKind, law: &str, r: Option<f64>, base: usize, dir: &Path) -> StudyConfig {
    let mut cfg = StudyConfig::default();
    cfg.seed = 11;
    cfg.domain.kind = DomainKind::UnitSquare;
    cfg.mesh.base = base;
    cfg.mesh.levels = 3;
    cfg.pair.kind = pair;
    cfg.law = LawConfig { name: law.into(), mu: Some(0.5), tau: None, r };
    cfg.reference.kind = ReferenceKind::Manufactured;
    cfg.reference.amplitude = 10.0;
    cfg.diagnostics.an = r.is_some();
    cfg.output.dir = dir.to_path_buf();
    cfg
}

struct Study {
    report: StudyReport,
    elapsed: Duration,
    csv: String,
}

fn study(pair: PairKind, law: &str, r: Option<f64>, base: usize) -> Study {
    let dir = tempfile::tempdir().unwrap();
    let cfg = study_config(pair, law, r, base, dir.path());
    let t = Instant::now();
    let report = run_study(&cfg).unwrap();
    let elapsed = t.elapsed();
    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    Study { report, elapsed, csv }
}

fn power_law_study(r: f64) -> &'static Study {
    static R15: OnceLock<Study> = OnceLock::new();
    static R3: OnceLock<Study> = OnceLock::new();
    let cell = if r < 2.0 { &R15 } else { &R3 };
    cell.get_or_init(|| study(PairKind::Mini, "power-law", Some(r), 16))
}

#[test]
fn newtonian_studies_converge_at_rate() {
    let _serial = serial();
    let mut all = true;
    for pair in [PairKind::Mini, PairKind::GuzmanNeilan] {
        let s = study(pair, "newtonian", None, 8);
        let rep = &s.report;
        let errs: Vec<f64> = rep.rows.iter().map(|r| r.err_u_h1).collect();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let rate = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
        let pass = rep.failure.is_none()
            && rep.rows.len() == 3
            && decreasing
            && rate >= 0.8
            && s.elapsed < Duration::from_secs(300);
        report(
            &format!("newtonian study [{}]", pair.name()),
            pass,
            format!("errors {}, min rate {rate:.3}, {:.2?}", sci(&errs), s.elapsed),
        );
        assert_eq!(s.csv.lines().next().unwrap(), "level,h,dofs,err_u,err_p,beta,norm_u,norm_S");
        all &= pass;
    }
    assert!(all);
}

#[test]
fn power_law_studies_have_decreasing_errors_and_bounded_norms() {
    let _serial = serial();
    let mut all = true;
    for r in [1.5, 3.0] {
        let s = power_law_study(r);
        let rep = &s.report;
        let eu: Vec<f64> = rep.rows.iter().map(|r| r.err_u).collect();
        let ep: Vec<f64> = rep.rows.iter().map(|r| r.err_p).collect();
        let dec = |e: &[f64]| e.windows(2).all(|w| w[1] < w[0]);
        let pass = rep.failure.is_none()
            && rep.rows.len() == 3
            && dec(&eu)
            && dec(&ep)
            && rep.flags.norm_growth < 0.1
            && s.elapsed < Duration::from_secs(300);
        report(
            &format!("power-law study [r={r}]"),
            pass,
            format!(
                "err_u {}, err_p {}, norm growth {:.3e}, {:.2?}",
                sci(&eu),
                sci(&ep),
                rep.flags.norm_growth, s.elapsed
            ),
        );
        all &= pass;
    }
    assert!(all);
}

#[test]
fn an_measures_decay_under_refinement() {
    let _serial = serial();
    let rep = &power_law_study(3.0).report;
    let series = |pick: &dyn Fn(&StudyRow) -> Vec<(f64, f64)>| {
        let cols: Vec<Vec<(f64, f64)>> = rep.rows.iter().map(pick).collect();
        (0..cols[0].len())
            .map(|i| (cols[0][i].0, cols.iter().map(|c| c[i].1).collect::<Vec<_>>()))
            .collect::<Vec<_>>()
    };
    let mut all = rep.rows.len() == 3;
    for (label, rows) in [
        ("exceedance eps", series(&|r| r.an_exceedance.clone())),
        ("integral theta", series(&|r| r.an_integrals.clone())),
    ] {
        for (param, values) in rows {
            let pass = values.windows(2).all(|w| w[1] < w[0]);
            report(&format!("a_n decay [{label}={param}]"), pass, sci(&values));
            all &= pass;
        }
    }
    let eps: Vec<f64> = rep.rows[0].an_exceedance.iter().map(|e| e.0).collect();
    assert_eq!(eps, vec![1e-2, 1e-3]);
    assert!(all);
}

// -------------------------------------------------------------- truncation

fn truncation_demo_config(dir: &Path) -> StudyConfig {
    let mut cfg = StudyConfig::default();
    cfg.seed = 7;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn truncation_demo() -> &'static (TruncationDemo, Duration) {
    static DEMO: OnceLock<(TruncationDemo, Duration)> = OnceLock::new();
    DEMO.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let demo = run_truncation_demo(&truncation_demo_config(dir.path())).unwrap();
        (demo, t.elapsed())
    })
}

#[test]
fn truncation_sweep_on_rough_field() {
    let _serial = serial();
    let sweep = &truncation_demo().0.sweep;
    let lambdas: Vec<f64> = sweep.reports.iter().map(|r| r.lambda).collect();
    let ratios: Vec<f64> = sweep.reports.iter().map(|r| r.gradient_bound).collect();
    let weak: Vec<f64> = sweep.reports.iter().map(|r| r.weak_type).collect();
    // one constant bounds every level and does not grow with λ
    let single_constant = sweep.gradient_constant.is_finite()
        && ratios.iter().all(|&r| r <= sweep.gradient_constant)
        && ratios.last() <= ratios.first();
    let weak_ok = sweep.weak_type_constant.is_finite() && weak.iter().all(|&w| w <= sweep.weak_type_constant);
    let pass = lambdas == [2.0, 4.0, 8.0, 16.0]
        && sweep.coincidence_residual <= 1e-12
        && sweep.whitney_pass
        && single_constant
        && weak_ok;
    report(
        "lipschitz truncation",
        pass,
        format!(
            "coincidence {:.3e}, whitney {}, sup|grad v_l|/l {ratios:.1?} (C = {:.1}), weak-type c = {:.3}",
            sweep.coincidence_residual, sweep.whitney_pass, sweep.gradient_constant, sweep.weak_type_constant
        ),
    );
    assert!(pass);
}

#[test]
fn level_selection_table_for_weakly_null_sequence() {
    let _serial = serial();
    let (demo, elapsed) = truncation_demo();
    let table = &demo.table;
    let members: std::collections::BTreeSet<usize> = table.rows.iter().map(|r| r.choice.n).collect();
    let js: std::collections::BTreeSet<u32> = table.rows.iter().map(|r| r.choice.j).collect();
    let windows = table.rows.iter().all(|r| {
        let j = r.choice.j as i32;
        let lo = 2f64.powi(2i32.pow(j as u32));
        let hi = 2f64.powi(2i32.pow(j as u32 + 1) - 1);
        lo <= r.choice.lambda && r.choice.lambda <= hi
    });
    let pass = members.len() == 6
        && js == (1..=4).collect()
        && windows
        && table.bounds_ok
        && table.max_ratio.is_finite()
        && *elapsed < Duration::from_secs(120);
    report(
        "level table",
        pass,
        format!("{} rows, max ratio {:.3}, {elapsed:.2?}", table.rows.len(), table.max_ratio),
    );
    assert!(pass);
}

// ------------------------------------------------------------- determinism

#[test]
fn single_threaded_runs_are_byte_identical() {
    let _serial = serial();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let run = || {
        pool.install(|| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = study_config(PairKind::Mini, "power-law", Some(3.0), 4, dir.path());
            cfg.mesh.levels = 2;
            run_study(&cfg).unwrap();
            let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
            let tdir = tempfile::tempdir().unwrap();
            let mut tcfg = truncation_demo_config(tdir.path());
            tcfg.truncation.lambdas = vec![4.0, 8.0];
            tcfg.truncation.sequence = 2;
            tcfg.truncation.j_max = 2;
            run_truncation_demo(&tcfg).unwrap();
            let tread = |f: &str| std::fs::read(tdir.path().join(f)).unwrap();
            [read("study.csv"), read("an.csv"), tread("truncation.csv"), tread("levels.csv")]
        })
    };
    let (a, b) = (run(), run());
    let pass = a == b;
    report("determinism", pass, "study.csv, an.csv, truncation.csv, levels.csv");
    assert!(pass);
}
