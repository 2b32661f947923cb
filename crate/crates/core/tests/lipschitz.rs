use std::sync::Arc;

use monoflow_core::elements::{PairKind, ProjectorPair, SpacePair};
use monoflow_core::linalg::{Mat3, Vec3, ZERO33};
use monoflow_core::lipschitz::{
    discrete_truncate, lipschitz_truncate, maximal_at, maximal_function, select_levels, velocity_maximal,
    DiscreteVelocity, Lattice, LevelInput, LevelSet, MeshField, RadiusGrid, Raster, Truncation, WhitneyCover,
};
use monoflow_core::mesh::{BoxDomain, Triangulation};
use monoflow_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n).unwrap())
}

/// Ball average of `χ_{B_1(0)}` around `x` by Monte Carlo.
fn disk_average_mc(x: [f64; 2], r: f64, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let mut hit = 0usize;
    let mut k = 0;
    while k < samples {
        let a = rng.gen_range(-1.0..1.0);
        let b = rng.gen_range(-1.0..1.0);
        if a * a + b * b >= 1.0 {
            continue;
        }
        k += 1;
        let p = [x[0] + r * a, x[1] + r * b];
        if p[0] * p[0] + p[1] * p[1] < 1.0 {
            hit += 1;
        }
    }
    hit as f64 / samples as f64
}

fn disk_raster() -> (Raster, RadiusGrid) {
    let tri = Triangulation::build_uniform(&BoxDomain::rect(-3.0, 3.0, -3.0, 3.0), 4).unwrap();
    let lattice = Lattice::around(&tri, 0.02).unwrap();
    let f = |x: &Vec3| if x[0] * x[0] + x[1] * x[1] < 1.0 { 1.0 } else { 0.0 };
    let radii = RadiusGrid::dyadic(0.05, 8.0).unwrap().refined().refined().refined();
    (Raster::from_fn(&lattice, &f), radii)
}

#[test]
fn maximal_function_of_disk_indicator() {
    let (raster, radii) = disk_raster();
    let m0 = maximal_at(&raster, &[0.0, 0.0, 0.0], 1.0, &radii);
    assert!((m0 - 1.0).abs() < 1e-12, "{m0}");
    // independent oracle: sup over a fine continuous radius sweep
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let oracle = (0..60)
        .map(|k| 1.0 + 0.05 * k as f64)
        .map(|r| disk_average_mc([2.0, 0.0], r, &mut rng, 40_000))
        .fold(0.0, f64::max);
    let m = maximal_at(&raster, &[2.0, 0.0, 0.0], 0.0, &radii);
    assert!((m - oracle).abs() < 0.02 * oracle, "M = {m}, oracle = {oracle}");
}

#[test]
fn maximal_function_dominates_and_grows_under_refinement() {
    let tri = square(6);
    let pair = SpacePair::new(tri.clone(), PairKind::Mini).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u: Vec<f64> = (0..pair.num_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lattice = Lattice::around(&tri, 0.5 * tri.h_min()).unwrap();
    let raster = Raster::gradient_norm(&lattice, &pair, &u).unwrap();
    let radii = RadiusGrid::for_mesh(&tri).unwrap();
    let m = maximal_function(&raster, &radii);
    let mr = maximal_function(&raster, &radii.refined());
    let n = lattice.n();
    for j in 0..n {
        for i in 0..n {
            assert!(m.value(i, j) >= m.local_value(i, j));
            assert!(mr.value(i, j) >= m.value(i, j));
        }
    }
    // the raster integrates |∇u| like the mesh quadrature
    let direct = monoflow_core::lipschitz::gradient_norm(&pair, &u, 1.0);
    assert!((raster.integral() - direct).abs() < 0.05 * direct, "{} vs {direct}", raster.integral());
}

#[test]
fn level_sets_reject_bad_levels() {
    let tri = square(4);
    let pair = SpacePair::new(tri, PairKind::Mini).unwrap();
    let u = vec![0.0; pair.num_velocity()];
    let m = velocity_maximal(&pair, &u).unwrap();
    for lam in [0.0, -1.0, f64::NAN] {
        assert!(matches!(m.level_set(lam), Err(Error::InvalidArgument(_))));
    }
    assert!(m.level_set(1.0).unwrap().is_empty());
}

fn blob_mask(lattice: &Lattice, centers: &[(f64, f64, f64)]) -> Vec<bool> {
    let n = lattice.n();
    let mut mask = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let x = lattice.center(i, j);
            mask[j * n + i] = centers
                .iter()
                .any(|&(a, b, r)| (x[0] - a).powi(2) + (x[1] - b).powi(2) < r * r);
        }
    }
    mask
}

fn unit_lattice(res: f64) -> Lattice {
    Lattice::around(&square(2), res).unwrap()
}

#[test]
fn whitney_cover_of_a_disk() {
    let lat = unit_lattice(1.0 / 64.0);
    let u = LevelSet::from_mask(&lat, 1.0, blob_mask(&lat, &[(0.5, 0.5, 0.3)])).unwrap();
    let cover = WhitneyCover::new(&u, 2).unwrap();
    let rep = cover.check();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.distance_ratio[0] >= 8.0 && rep.distance_ratio[1] < 18.0, "{rep:?}");
    assert!(rep.max_neighbors <= 32);
    // deeper enumeration leaves a thinner uncovered collar
    let finer = WhitneyCover::new(&u, 4).unwrap().check();
    assert!(finer.pass);
    assert!(finer.uncovered_measure < 0.5 * rep.uncovered_measure, "{finer:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn whitney_properties_hold_for_random_sets(
        blobs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.05f64..0.4), 1..4),
        seed in 0u64..1000,
    ) {
        let lat = unit_lattice(1.0 / 32.0);
        let u = LevelSet::from_mask(&lat, 1.0, blob_mask(&lat, &blobs)).unwrap();
        let cover = WhitneyCover::new(&u, 2).unwrap();
        let rep = cover.check();
        prop_assert!(rep.pass, "{:?}", rep);
        // lazy lookup: every point of U lies in an admissible cube
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5), 0.0];
            match cover.cube_at(&x) {
                Some(q) => {
                    prop_assert!(u.contains(&x));
                    let g = cover.geometry(&q);
                    prop_assert!(x[0] >= g.lo[0] && x[0] <= g.lo[0] + g.side);
                    prop_assert!(x[1] >= g.lo[1] && x[1] <= g.lo[1] + g.side);
                    let d = cover.distance(&q);
                    let l = cover.side(&q) * 2f64.sqrt();
                    prop_assert!(d >= 8.0 * l && d < 18.0 * l);
                    for m in cover.neighbors(&q) {
                        let r = cover.side(&m) / cover.side(&q);
                        prop_assert!((0.5..=2.0).contains(&r));
                    }
                }
                // lookup is depth-capped: a thin collar along ∂U has no cube
                None => {
                    let e = 1e-3 * lat.delta();
                    let near = [[e, 0.0], [-e, 0.0], [0.0, e], [0.0, -e]]
                        .iter()
                        .any(|o| !u.contains(&[x[0] + o[0], x[1] + o[1], 0.0]));
                    prop_assert!(!u.contains(&x) || near, "{:?}", x);
                }
            }
        }
    }
}

fn rough_field(n: usize, amp: f64, seed: u64) -> (SpacePair, Vec<f64>) {
    let pair = SpacePair::new(square(n), PairKind::Mini).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = (0..pair.num_velocity()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
    (pair, u)
}

#[test]
fn partition_of_unity_properties() {
    let (pair, u) = rough_field(8, 0.1, 5);
    let m = velocity_maximal(&pair, &u).unwrap();
    let lam = 0.5 * m.max();
    let field = DiscreteVelocity::new(&pair, &u).unwrap();
    let t = Truncation::new(&field, m.level_set(lam).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tested = 0;
    for _ in 0..3000 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0];
        let terms = t.partition(&x);
        if terms.is_empty() {
            continue;
        }
        tested += 1;
        let s: f64 = terms.iter().map(|p| p.psi).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let gs = [terms.iter().map(|p| p.grad[0]).sum::<f64>(), terms.iter().map(|p| p.grad[1]).sum::<f64>()];
        assert!(gs[0].abs() + gs[1].abs() < 1e-8 * (1.0 + terms.iter().map(|p| p.grad[0].abs()).sum::<f64>()));
        for p in &terms {
            let g = t.cover().geometry(&p.cube);
            let c = g.center();
            let cheb = (x[0] - c[0]).abs().max((x[1] - c[1]).abs());
            assert!(p.psi >= 0.0);
            assert!(cheb <= 0.5 * monoflow_core::lipschitz::SUPPORT_DILATION * g.side + 1e-14);
            if cheb <= 0.5 * 0.875 * g.side {
                assert!((p.psi - 1.0).abs() < 1e-14, "ψ = {} inside 7/8 Q", p.psi);
            }
        }
        // gradient against central differences, with a step well inside
        // the transition collar of the cube at x
        let h = 3e-6 * t.cover().side(&terms[0].cube);
        let (_, g) = t.eval(&x);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            if t.partition(&xp).is_empty() || t.partition(&xm).is_empty() {
                continue;
            }
            let (vp, _) = t.eval(&xp);
            let (vm, _) = t.eval(&xm);
            for i in 0..2 {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!((fd - g[i][k]).abs() < 1e-3 * (1.0 + g[i][k].abs()), "{fd} vs {}", g[i][k]);
            }
        }
    }
    assert!(tested > 100);
}

#[test]
fn truncation_of_rough_field() {
    let (pair, u) = rough_field(8, 0.1, 21);
    let m = velocity_maximal(&pair, &u).unwrap();
    let field = DiscreteVelocity::new(&pair, &u).unwrap();
    let mut bounds = Vec::new();
    for f in [0.25, 0.5, 0.75] {
        let lam = f * m.max();
        let (_, rep) = lipschitz_truncate(&field, &m, lam).unwrap();
        println!("{rep:?}");
        assert!(rep.whitney.pass);
        assert_eq!(rep.coincidence_residual, 0.0);
        assert_eq!(rep.boundary_residual, 0.0);
        assert!(rep.weak_type <= 9.0, "{rep:?}");
        assert!(rep.gradient_bound.is_finite());
        bounds.push(rep.gradient_bound);
    }
    let (lo, hi) = bounds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 10.0, "{bounds:?}");
}

#[test]
fn smooth_fields_below_level_are_untouched() {
    let tri = square(8);
    let f = |x: &Vec3| -> (Vec3, Mat3) {
        let mut g = ZERO33;
        g[0][1] = 1.0;
        ([x[1], 0.0, 0.0], g)
    };
    let field = MeshField { mesh: &tri, f };
    let lattice = Lattice::around(&tri, 0.5 * tri.h_min()).unwrap();
    let raster = Raster::from_cells(&lattice, &tri, &|_, _| 1.0);
    let m = maximal_function(&raster, &RadiusGrid::for_mesh(&tri).unwrap());
    assert!(m.max() <= 1.0 + 1e-12);
    let (t, rep) = lipschitz_truncate(&field, &m, 2.0).unwrap();
    assert!(t.level_set().is_empty());
    assert_eq!(rep.value_ratio, [1.0, 1.0, 1.0]);
    assert_eq!(rep.gradient_ratio, [1.0, 1.0, 1.0]);
}

/// Projection of a narrow Gaussian bump centred at `(0.3, 0.3)`.
fn peaked_field(pair: &SpacePair) -> Vec<f64> {
    let e2 = 0.05f64 * 0.05;
    let phi = move |x: &Vec3| (-((x[0] - 0.3).powi(2) + (x[1] - 0.3).powi(2)) / e2).exp();
    let f = monoflow_core::elements::FnField::new(
        move |x: &Vec3| [0.1 * phi(x), -0.05 * phi(x), 0.0],
        move |x: &Vec3| {
            let p = phi(x);
            let d = [-2.0 * (x[0] - 0.3) / e2 * p, -2.0 * (x[1] - 0.3) / e2 * p];
            let mut g = ZERO33;
            g[0] = [0.1 * d[0], 0.1 * d[1], 0.0];
            g[1] = [-0.05 * d[0], -0.05 * d[1], 0.0];
            g
        },
    );
    ProjectorPair::new(pair).unwrap().project_field(pair, &f).unwrap()
}

#[test]
fn discrete_truncation_is_local() {
    for kind in [PairKind::Mini, PairKind::P2P0, PairKind::GuzmanNeilan] {
        let pair = SpacePair::new(square(16), kind).unwrap();
        let u = peaked_field(&pair);
        let proj = ProjectorPair::new(&pair).unwrap();
        let m = velocity_maximal(&pair, &u).unwrap();
        let lam = 0.5 * m.max();
        let (w, rep) = discrete_truncate(&pair, &proj, &u, &m, lam).unwrap();
        println!("{kind:?} {rep:?}");
        assert_eq!(w.len(), u.len());
        assert!(rep.region_cells > 0 && rep.region_cells < pair.mesh().num_cells() / 2);
        assert!(rep.unchanged_residual < 1e-12, "{rep:?}");
        assert!(rep.kappa > 0.0 && rep.kappa <= 1.0);
        // above the maximum nothing moves
        let (w2, rep2) = discrete_truncate(&pair, &proj, &u, &m, 2.0 * m.max()).unwrap();
        assert_eq!(rep2.region_cells, 0);
        let diff = w2.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}

#[test]
fn level_selection_for_small_gradients() {
    let tri = square(4);
    let pair = SpacePair::new(tri.clone(), PairKind::Mini).unwrap();
    let proj = ProjectorPair::new(&pair).unwrap();
    let bump = monoflow_core::elements::FnField::new(
        |x: &Vec3| [x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]), 0.0, 0.0],
        |x: &Vec3| {
            let mut g = ZERO33;
            g[0][0] = (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]);
            g[0][1] = x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]);
            g
        },
    );
    let u = proj.project_field(&pair, &bump).unwrap();
    let m = velocity_maximal(&pair, &u).unwrap();
    assert!(m.max() <= 4.0);
    let rows = select_levels(&[LevelInput { pair: &pair, u: &u, maximal: &m }], 2.0, 2, 1.0).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].lambda, 4.0);
    for r in rows {
        assert_eq!(r.ratio, 0.0);
    }
    assert!(select_levels(&[], 0.5, 2, 1.0).is_err());
    assert!(select_levels(&[], 2.0, 2, 0.0).is_err());
}

