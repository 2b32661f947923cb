use std::sync::Arc;

use monoflow_core::constitutive::{GraphLaw, LawKind};
use monoflow_core::elements::{PairKind, ProjectorPair, SpacePair};
use monoflow_core::harness::{
    export_fields, graph_check, level_table, read_field_file, run_study, truncation_sweep, write_field_file,
    DomainKind, LawConfig, ReferenceKind, StudyConfig, STUDY_HEADER,
};
use monoflow_core::mesh::{read_vtk_mesh, BoxDomain, Triangulation};
use monoflow_core::system::{model_for, r_tilde};
use monoflow_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n).unwrap())
}

fn small_config(dir: &std::path::Path) -> StudyConfig {
    let mut cfg = StudyConfig::default();
    cfg.mesh.base = 2;
    cfg.mesh.levels = 2;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = StudyConfig::default();
    cfg.law = LawConfig {
        name: "herschel-bulkley".into(),
        mu: Some(0.5),
        tau: Some(0.1),
        r: Some(2.5),
    };
    cfg.diagnostics.an = true;
    let back = StudyConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    // sections may be omitted
    let partial = StudyConfig::from_toml("seed = 3\n[pair]\nkind = \"p2-p0\"\n").unwrap();
    assert_eq!(partial.seed, 3);
    assert_eq!(partial.pair.kind, PairKind::P2P0);
    assert_eq!(partial.mesh, StudyConfig::default().mesh);
}

#[test]
fn validation_enforces_thresholds() {
    let parse = |s: &str| StudyConfig::from_toml(s);
    // 1.2 < 4/3 for a pair whose velocities are not solenoidal
    let e = parse("[law]\nname = \"power-law\"\nr = 1.2\n").unwrap_err();
    assert!(matches!(e, Error::Validation(_)), "{e}");
    // … but above 1 for the exactly divergence-free pair
    parse("[pair]\nkind = \"guzman-neilan\"\n[law]\nname = \"power-law\"\nr = 1.2\n").unwrap();
    let e = parse("[pair]\nkind = \"guzman-neilan\"\n[law]\nname = \"power-law\"\nr = 1.0\n").unwrap_err();
    assert!(matches!(e, Error::Validation(_)));
    for bad in [
        "[mesh]\nlevels = 0\n",
        "[domain]\nkind = \"boxes\"\nboxes = [[0.0, 1.0, 0.0, 1.0]]\n",
        "[domain]\nkind = \"boxes\"\n[reference]\nkind = \"surrogate\"\n",
        "[law]\nname = \"vanilla\"\n",
        "[truncation]\nkappa = 0.0\n",
        "[truncation]\nj_max = 6\n",
        "[diagnostics]\nan_eps = [-1.0]\n",
        "[mesh]\nbase = 64\nlevels = 3\n",
    ] {
        assert!(matches!(parse(bad), Err(Error::Validation(_))), "{bad}");
    }
    assert!(matches!(parse("[law]\nnam = \"x\"\n"), Err(Error::Parse { .. })));
    assert!(matches!(parse("[pair]\nkind = \"q7\"\n"), Err(Error::Parse { .. })));
}

#[test]
fn study_writes_schema_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.diagnostics.an = true;
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert!(rep.failure.is_none());
    assert_eq!(rep.r_tilde, r_tilde(2.0, 2));
    assert_eq!(rep.r_tilde, 2.0);
    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "level,h,dofs,err_u,err_p,beta,norm_u,norm_S");
    assert_eq!(STUDY_HEADER.join(","), "level,h,dofs,err_u,err_p,beta,norm_u,norm_S");
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 8);
        assert_eq!(cols[0], k.to_string());
        assert_eq!(cols[5], "NaN");
        let e: f64 = cols[3].parse().unwrap();
        assert!((e - rep.rows[k].err_u).abs() <= 1e-11 * e);
    }
    let r = (rep.rows[0].err_u / rep.rows[1].err_u).log2();
    assert_eq!(rep.velocity_rates, vec![r]);
    assert!(dir.path().join("an.csv").exists());
    let report = std::fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert!(report.contains("[environment]") && report.contains("r_tilde = 2.0"));
}

#[test]
fn reported_r_tilde_follows_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.mesh.levels = 1;
    cfg.law = LawConfig {
        name: "power-law".into(),
        mu: Some(1.0),
        tau: None,
        r: Some(4.0 / 3.0 + 0.05),
    };
    let rep = run_study(&cfg).unwrap();
    let r: f64 = 4.0 / 3.0 + 0.05;
    let expect = (r / (r - 1.0)).min(r / (2.0 - r));
    assert!((rep.r_tilde - expect).abs() < 1e-14);
    assert!((r_tilde(4.0 / 3.0, 2) - 2.0).abs() < 1e-14);
    assert_eq!(r_tilde(2.0, 3), 2.0);
}

#[test]
fn solver_failure_keeps_completed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.law = LawConfig {
        name: "power-law".into(),
        mu: Some(0.5),
        tau: None,
        r: Some(3.0),
    };
    cfg.solver.max_iter = 1;
    let rep = run_study(&cfg).unwrap();
    let fail = rep.failure.as_ref().expect("one Newton step cannot converge");
    assert!(fail.numerical);
    assert_eq!(fail.level, 0);
    assert!(!rep.flags.pass);
    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn surrogate_reference_on_a_union_of_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.domain.kind = DomainKind::Boxes;
    cfg.domain.boxes = vec![[0.0, 2.0, 0.0, 1.0], [0.0, 1.0, 1.0, 2.0]];
    cfg.reference.kind = ReferenceKind::Surrogate;
    cfg.mesh.base = 4;
    let rep = run_study(&cfg).unwrap();
    assert!(rep.reference_note.is_some());
    assert!(rep.flags.velocity_decreasing, "{:?}", rep.rows);
}

#[test]
fn zero_solution_exports_zero_arrays() {
    let pair = SpacePair::new(square(3), PairKind::P2P0).unwrap();
    let law = GraphLaw::new(LawKind::Bingham { mu: 1.0, tau: 0.5 }, 2).unwrap();
    let u = vec![0.0; pair.num_velocity()];
    let p = vec![0.0; pair.num_pressure()];
    let vtk = export_fields(&pair, &model_for(&law, Some(8)), &u, &p, "zero");
    let mut data = false;
    for line in vtk.lines() {
        if line.starts_with("POINT_DATA") || line.starts_with("CELL_DATA") {
            data = true;
            continue;
        }
        if data && line.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-') {
            for v in line.split_whitespace() {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
            }
        }
    }
    assert!(data);
    // the exported mesh reads back unchanged
    let back = read_vtk_mesh(&vtk).unwrap();
    assert_eq!(back.vertices(), pair.mesh().vertices());
    assert_eq!(back.cell_list(), pair.mesh().cell_list());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn field_files_round_trip_exactly(n in 1usize..5, kind in 0usize..5, seed in any::<u64>()) {
        let pair = SpacePair::new(square(n), PairKind::ALL[kind]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..pair.num_velocity()).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let p: Vec<f64> = (0..pair.num_pressure()).map(|_| rng.gen::<f64>() * 1e-7).collect();
        let f = read_field_file(&write_field_file(&pair, &u, &p)).unwrap();
        prop_assert_eq!(f.pair.kind(), pair.kind());
        prop_assert_eq!(&f.u, &u);
        prop_assert_eq!(&f.p, &p);
        prop_assert_eq!(f.pair.mesh().vertices(), pair.mesh().vertices());
        prop_assert_eq!(f.pair.mesh().cell_list(), pair.mesh().cell_list());
    }
}

#[test]
fn malformed_field_files_are_rejected() {
    let pair = SpacePair::new(square(2), PairKind::Mini).unwrap();
    let good = write_field_file(&pair, &vec![0.5; pair.num_velocity()], &vec![0.0; pair.num_pressure()]);
    assert!(matches!(read_field_file(&good.replacen("PAIR mini", "PAIR nope", 1)), Err(Error::InvalidArgument(_))));
    assert!(matches!(read_field_file(&good.replacen("VELOCITY", "VELO", 1)), Err(Error::Parse { .. })));
    let short = good.replacen(&format!("VELOCITY {}", pair.num_velocity()), &format!("VELOCITY {}", pair.num_velocity() - 1), 1);
    assert!(read_field_file(&short).is_err());
}

#[test]
fn newtonian_graph_has_zero_slack() {
    let law = GraphLaw::new(LawKind::Newtonian { mu: 0.7 }, 2).unwrap();
    let g = graph_check(&law, 1, 2000, 200).unwrap();
    assert!(g.pass);
    assert!((g.axioms.min_monotonicity - 1.0).abs() < 1e-12);
    assert!((g.axioms.c1 - 1.4).abs() < 1e-12 && (g.axioms.c2 - 1.4).abs() < 1e-12);
    assert_eq!(g.axioms.k, 0.0);
    assert_eq!(g.axioms.m, 0.0);
    assert_eq!(g.bounds.last_pair_variation, 0.0);
}

#[test]
fn viscoplastic_graphs() {
    let law = GraphLaw::new(LawKind::Bingham { mu: 1.0, tau: 1.0 }, 2).unwrap();
    let g = graph_check(&law, 2, 2000, 200).unwrap();
    assert!(g.axioms.min_monotonicity >= -1e-12 && g.axioms.c2 > 0.0, "{:?}", g.axioms);
    // |σ| ~ |δ|^{r−1} for large shear rates: log-log slope against r − 1
    let law = GraphLaw::new(LawKind::HerschelBulkley { mu: 1.0, tau: 1.0, r: 1.5 }, 2).unwrap();
    let g = graph_check(&law, 3, 4000, 200).unwrap();
    assert!((g.axioms.growth_exponent - 0.5).abs() < 0.05, "{}", g.axioms.growth_exponent);
    assert!(g.pass);
}

#[test]
fn zero_sequence_gives_trivial_tables() {
    let pair = SpacePair::new(square(8), PairKind::Mini).unwrap();
    let zero = vec![0.0; pair.num_velocity()];
    let t = level_table(&pair, &[zero.clone(), zero.clone()], 2.0, 3, 1.0).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert!(t.bounds_ok);
    for r in &t.rows {
        assert_eq!(r.choice.ratio, 0.0);
        assert_eq!(r.region_cells, 0);
        assert_eq!(r.choice.lambda, r.bounds[0]);
        assert_eq!(r.sup_truncated, 0.0);
    }
    let s = truncation_sweep(&pair, &zero, &[1.0, 2.0], None).unwrap();
    assert!(s.whitney_pass);
    assert!(s.reports.iter().all(|r| r.level_set_measure == 0.0 && r.coincidence_residual == 0.0));
}

#[test]
fn oscillations_are_weakly_null_with_bounded_gradients() {
    let pair = SpacePair::new(square(32), PairKind::Mini).unwrap();
    let proj = ProjectorPair::new(&pair).unwrap();
    let mut grads = Vec::new();
    let mut means = Vec::new();
    for n in 1..=5 {
        let u = monoflow_core::harness::oscillation(&pair, &proj, n, 1.0, 2.0).unwrap();
        grads.push(monoflow_core::lipschitz::gradient_norm(&pair, &u, 2.0));
        // ∫ Eⁿ against a fixed smooth test function
        let rule = pair.default_rule();
        let mut m = 0.0;
        for c in 0..pair.mesh().num_cells() {
            for (lam, w) in rule.bary.iter().zip(&rule.weights) {
                let x = pair.mesh().point(c, lam);
                m += w * pair.mesh().measure(c) * pair.velocity_at(&u, c, lam).0[0] * x[0] * x[1];
            }
        }
        means.push(m.abs());
    }
    assert!(grads.iter().all(|g| (g - 1.0).abs() < 1e-12), "{grads:?}");
    assert!(means[4] < 0.1 * means[0], "{means:?}");
}
