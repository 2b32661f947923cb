//! Truncation demonstration, constitutive graph checks and inf-sup sweeps.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{LawConfig, StudyConfig};
use super::export::{num, save, vertex_velocity, Table};
use crate::constitutive::{mollified_bounds, AxiomReport, BoundsReport, GraphLaw, IdentityReport, PhiLipschitzRow};
use crate::elements::{FnField, PairKind, ProjectorPair, SpacePair};
use crate::error::Result;
use crate::linalg::{norm, Vec3, ZERO33};
use crate::lipschitz::{
    discrete_truncate, gradient_norm, lipschitz_truncate, select_levels, velocity_maximal, DiscreteVelocity,
    LevelChoice, LevelInput, Truncation, TruncationReport, WhitneyCover,
};
use crate::mesh::{write_vtk, BoxDomain, Triangulation, VtkField};
use crate::system::inf_sup_constant;

// ---------------------------------------------------------------- truncation

/// Truncations of one field at several levels.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationSweep {
    pub max_maximal: f64,
    pub gradient_l1: f64,
    pub reports: Vec<TruncationReport>,
    /// `max sup|∇v_λ|/λ` over the sweep.
    pub gradient_constant: f64,
    /// Ratio of the largest to the smallest `sup|∇v_λ|/λ`.
    pub gradient_spread: f64,
    /// Fitted `c` in `λ|U_λ| ≤ c‖∇v‖_1`.
    pub weak_type_constant: f64,
    pub whitney_pass: bool,
    /// Largest `|v_λ − v|` on sampled `H_λ`.
    pub coincidence_residual: f64,
}

pub const TRUNCATION_HEADER: [&str; 13] = [
    "lambda",
    "level_set_measure",
    "clipped",
    "cubes",
    "whitney",
    "coincidence",
    "boundary",
    "gradient_bound",
    "gradient_bound_in_u",
    "partition_constant",
    "weak_type",
    "mean_jump",
    "gradient_ratio_inf",
];

impl TruncationSweep {
    pub fn csv(&self) -> String {
        let mut t = Table::new(&TRUNCATION_HEADER);
        for r in &self.reports {
            t.row([
                num(r.lambda),
                num(r.level_set_measure),
                r.clipped.to_string(),
                r.whitney.num_cubes.to_string(),
                r.whitney.pass.to_string(),
                num(r.coincidence_residual),
                num(r.boundary_residual),
                num(r.gradient_bound),
                num(r.gradient_bound_in_u),
                num(r.partition_constant),
                num(r.weak_type),
                num(r.mean_jump),
                num(r.gradient_ratio[2]),
            ]);
        }
        t.finish()
    }
}

/// Legacy VTK polydata with one quadrilateral per Whitney cube.
pub fn whitney_vtk(cover: &WhitneyCover, title: &str) -> String {
    let mut s = String::new();
    let n = cover.len();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA");
    let _ = writeln!(s, "POINTS {} double", 4 * n);
    for q in cover.cubes() {
        let g = cover.geometry(q);
        let [x, y] = g.lo;
        let l = g.side;
        for (a, b) in [(x, y), (x + l, y), (x + l, y + l), (x, y + l)] {
            let _ = writeln!(s, "{a} {b} 0");
        }
    }
    let _ = writeln!(s, "POLYGONS {n} {}", 5 * n);
    for k in 0..n {
        let b = 4 * k;
        let _ = writeln!(s, "4 {} {} {} {}", b, b + 1, b + 2, b + 3);
    }
    let _ = writeln!(s, "CELL_DATA {n}\nSCALARS side double 1\nLOOKUP_TABLE default");
    for q in cover.cubes() {
        let _ = writeln!(s, "{}", cover.side(q));
    }
    s
}

fn truncation_vtk(pair: &SpacePair, u: &[f64], t: &Truncation<'_>) -> String {
    let tri = pair.mesh();
    let v = vertex_velocity(pair, u);
    let vl: Vec<Vec3> = tri.vertices().iter().map(|x| t.eval(x).0).collect();
    let indicator: Vec<f64> = (0..tri.num_cells())
        .map(|c| if t.level_set().contains(&tri.barycenter(c)) { 1.0 } else { 0.0 })
        .collect();
    write_vtk(
        tri,
        &format!("truncation at lambda {}", t.lambda()),
        &[
            VtkField::PointVector("v", &v),
            VtkField::PointVector("v_lambda", &vl),
            VtkField::CellScalar("level_set", &indicator),
        ],
    )
}

/// Truncates `u` at every level in `lambdas`; with `vtk_dir`, writes the
/// fields and Whitney covers there.
pub fn truncation_sweep(pair: &SpacePair, u: &[f64], lambdas: &[f64], vtk_dir: Option<&Path>) -> Result<TruncationSweep> {
    let maximal = velocity_maximal(pair, u)?;
    let field = DiscreteVelocity::new(pair, u)?;
    let mut reports = Vec::new();
    for &lam in lambdas {
        let (t, rep) = lipschitz_truncate(&field, &maximal, lam)?;
        log::info!(
            "λ = {lam}: |U| = {:.4}, {} cubes, sup|∇v_λ|/λ = {:.3}",
            rep.level_set_measure,
            rep.whitney.num_cubes,
            rep.gradient_bound
        );
        if let Some(dir) = vtk_dir {
            save(dir, &format!("truncation_{lam}.vtk"), &truncation_vtk(pair, u, &t))?;
            save(dir, &format!("whitney_{lam}.vtk"), &whitney_vtk(t.cover(), &format!("whitney cubes {lam}")))?;
        }
        reports.push(rep);
    }
    let gb: Vec<f64> = reports.iter().map(|r| r.gradient_bound).collect();
    let hi = gb.iter().copied().fold(0.0, f64::max);
    let lo = gb.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TruncationSweep {
        max_maximal: maximal.max(),
        gradient_l1: gradient_norm(pair, u, 1.0),
        gradient_constant: hi,
        gradient_spread: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        weak_type_constant: reports.iter().map(|r| r.weak_type).fold(0.0, f64::max),
        whitney_pass: reports.iter().all(|r| r.whitney.pass),
        coincidence_residual: reports.iter().map(|r| r.coincidence_residual).fold(0.0, f64::max),
        reports,
    })
}

/// One row of the level table of the weak-null sequence.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub choice: LevelChoice,
    /// `2^{2^j}` and `2^{2^{j+1}−1}`.
    pub bounds: [f64; 2],
    pub kappa: f64,
    pub region_cells: usize,
    pub unchanged_residual: f64,
    pub gradient_norm: f64,
    /// `sup|Eⁿ|` and `sup|E^{n,j}|` at quadrature points.
    pub sup_field: f64,
    pub sup_truncated: f64,
}

pub const LEVELS_HEADER: [&str; 14] = [
    "n",
    "j",
    "lambda",
    "lower",
    "upper",
    "exceedance",
    "region_measure",
    "ratio",
    "kappa",
    "region_cells",
    "unchanged_residual",
    "grad_norm",
    "sup_field",
    "sup_truncated",
];

#[derive(Debug, Clone, Serialize)]
pub struct LevelTable {
    pub s: f64,
    pub rows: Vec<LevelRow>,
    /// Every `λ_{n,j}` inside its dyadic window.
    pub bounds_ok: bool,
    pub max_ratio: f64,
}

impl LevelTable {
    pub fn csv(&self) -> String {
        let mut t = Table::new(&LEVELS_HEADER);
        for r in &self.rows {
            let c = &r.choice;
            t.row([
                (c.n + 1).to_string(),
                c.j.to_string(),
                num(c.lambda),
                num(r.bounds[0]),
                num(r.bounds[1]),
                num(c.exceedance),
                num(c.region_measure),
                num(c.ratio),
                num(r.kappa),
                r.region_cells.to_string(),
                num(r.unchanged_residual),
                num(r.gradient_norm),
                num(r.sup_field),
                num(r.sup_truncated),
            ]);
        }
        t.finish()
    }
}

fn sup_norm(pair: &SpacePair, u: &[f64]) -> f64 {
    let rule = pair.default_rule();
    let mut m: f64 = 0.0;
    for c in 0..pair.mesh().num_cells() {
        for lam in &rule.bary {
            m = m.max(norm(&pair.velocity_at(u, c, lam).0));
        }
        for k in 0..=pair.dim() {
            let mut lam = [0.0; 4];
            lam[k] = 1.0;
            m = m.max(norm(&pair.velocity_at(u, c, &lam).0));
        }
    }
    m
}

/// Radius of the envelope of the oscillating sequence.
pub const ENVELOPE_RADIUS: f64 = 0.35;

/// `η(x) = (1 − |x − c|²/R²)²` inside `B_R(c)`, `c = (½, ½)`, with its gradient.
fn envelope(x: &Vec3) -> (f64, [f64; 2]) {
    let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
    let t = 1.0 - (dx * dx + dy * dy) / (ENVELOPE_RADIUS * ENVELOPE_RADIUS);
    if t <= 0.0 {
        return (0.0, [0.0; 2]);
    }
    let g = -4.0 * t / (ENVELOPE_RADIUS * ENVELOPE_RADIUS);
    (t * t, [g * dx, g * dy])
}

/// `Eⁿ ∝ (kπ)⁻¹ cos(kπ(x−½)) cos(kπ(y−½)) η(x) (1, 1)` with `k = 2^{n−1}`
/// and a smooth envelope `η`, projected and scaled so that `‖∇Eⁿ‖_s = g`:
/// fixed gradient norm, values shrinking like `1/k`, weakly null.
pub fn oscillation(pair: &SpacePair, projector: &ProjectorPair, n: usize, g: f64, s: f64) -> Result<Vec<f64>> {
    let k = (1u64 << (n - 1)) as f64 * std::f64::consts::PI;
    let f = FnField::new(
        move |x: &Vec3| {
            let v = (k * (x[0] - 0.5)).cos() / k * (k * (x[1] - 0.5)).cos() * envelope(x).0;
            [v, v, 0.0]
        },
        move |x: &Vec3| {
            let (eta, deta) = envelope(x);
            let (cx, sx) = ((k * (x[0] - 0.5)).cos(), (k * (x[0] - 0.5)).sin());
            let (cy, sy) = ((k * (x[1] - 0.5)).cos(), (k * (x[1] - 0.5)).sin());
            let w = cx * cy / k;
            let gx = -sx * cy * eta + w * deta[0];
            let gy = -cx * sy * eta + w * deta[1];
            let mut d = ZERO33;
            d[0] = [gx, gy, 0.0];
            d[1] = [gx, gy, 0.0];
            d
        },
    );
    let mut u = projector.project_field(pair, &f)?;
    let norm = gradient_norm(pair, &u, s);
    if norm > 0.0 {
        u.iter_mut().for_each(|v| *v *= g / norm);
    }
    Ok(u)
}

/// Level selection plus discrete truncation over a sequence of fields on
/// one space. Rows carry the 0-based member index `n`; tables print `n + 1`.
pub fn level_table(pair: &SpacePair, fields: &[Vec<f64>], s: f64, j_max: u32, kappa: f64) -> Result<LevelTable> {
    let projector = ProjectorPair::new(pair)?;
    let maximals = fields
        .iter()
        .map(|u| velocity_maximal(pair, u))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<LevelInput<'_>> = fields
        .iter()
        .zip(&maximals)
        .map(|(u, m)| LevelInput { pair, u, maximal: m })
        .collect();
    let choices = select_levels(&inputs, s, j_max, kappa)?;
    let mut rows = Vec::new();
    for c in choices {
        let (u, m) = (&fields[c.n], &maximals[c.n]);
        let (w, rep) = discrete_truncate(pair, &projector, u, m, c.lambda)?;
        let bounds = [2f64.powi(1 << c.j), 2f64.powi((1 << (c.j + 1)) - 1)];
        rows.push(LevelRow {
            bounds,
            kappa: rep.kappa,
            region_cells: rep.region_cells,
            unchanged_residual: rep.unchanged_residual,
            gradient_norm: gradient_norm(pair, u, s),
            sup_field: sup_norm(pair, u),
            sup_truncated: sup_norm(pair, &w),
            choice: c,
        });
    }
    let bounds_ok = rows
        .iter()
        .all(|r| r.bounds[0] <= r.choice.lambda && r.choice.lambda <= r.bounds[1]);
    let max_ratio = rows.iter().map(|r| r.choice.ratio).fold(0.0, f64::max);
    Ok(LevelTable {
        s,
        rows,
        bounds_ok,
        max_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationDemo {
    pub sweep: TruncationSweep,
    pub table: LevelTable,
    /// `sup|E^{n,j}|` of the last member over the first, per `j`.
    pub decay: Vec<f64>,
}

/// Seeded random vertex values of amplitude `amp` on the vertices within
/// distance `radius` of `(½, ½)`; all other coefficients vanish.
pub fn rough_field(pair: &SpacePair, amp: f64, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; pair.num_velocity()];
    for (v, x) in pair.mesh().vertices().iter().enumerate() {
        if (x[0] - 0.5).hypot(x[1] - 0.5) >= radius {
            continue;
        }
        for comp in 0..pair.dim() {
            let val = amp * rng.gen_range(-1.0..1.0);
            if let Some(d) = pair.vertex_dof(v, comp) {
                u[d] = val;
            }
        }
    }
    u
}

/// Truncation sweep of a rough random field plus the level table of an
/// oscillating weak-null sequence; writes `truncation.csv`, `levels.csv`
/// and `truncation.toml`.
pub fn run_truncation_demo(cfg: &StudyConfig) -> Result<TruncationDemo> {
    cfg.validate()?;
    let t = &cfg.truncation;
    let dir = cfg.output.dir.as_path();
    let square = |n| Triangulation::build_uniform(&BoxDomain::unit(2), n).map(Arc::new);

    let pair = SpacePair::new(square(t.mesh)?, t.pair)?;
    let u = rough_field(&pair, t.amplitude, t.radius, cfg.seed);
    let sweep = truncation_sweep(&pair, &u, &t.lambdas, cfg.output.vtk.then_some(dir))?;
    save(dir, "truncation.csv", &sweep.csv())?;

    let pair = SpacePair::new(square(t.sequence_mesh)?, t.pair)?;
    let projector = ProjectorPair::new(&pair)?;
    let fields = (1..=t.sequence)
        .map(|n| oscillation(&pair, &projector, n, t.sequence_gradient, t.s))
        .collect::<Result<Vec<_>>>()?;
    let table = level_table(&pair, &fields, t.s, t.j_max, t.kappa)?;
    save(dir, "levels.csv", &table.csv())?;

    let decay = (1..=t.j_max)
        .map(|j| {
            let sup: Vec<f64> = table.rows.iter().filter(|r| r.choice.j == j).map(|r| r.sup_truncated).collect();
            match (sup.first(), sup.last()) {
                (Some(&a), Some(&b)) if a > 0.0 => b / a,
                _ => 0.0,
            }
        })
        .collect();
    let demo = TruncationDemo { sweep, table, decay };
    save(
        dir,
        "truncation.toml",
        &toml::to_string(&demo).unwrap_or_else(|e| format!("# serialisation failed: {e}\n")),
    )?;
    Ok(demo)
}

// ------------------------------------------------------------ graph checks

#[derive(Debug, Clone, Serialize)]
pub struct GraphCheck {
    pub axioms: AxiomReport,
    pub bounds: BoundsReport,
    pub identities: IdentityReport,
    pub phi: Vec<PhiLipschitzRow>,
    pub pass: bool,
}

pub const AXIOM_SAMPLES: usize = 10_000;
pub const IDENTITY_SAMPLES: usize = 1_000;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const BOUNDS_TOL: f64 = 0.05;
pub const PHI_TOL: f64 = 1e-6;
pub const PHI_LEVELS: [f64; 7] = [0.0, 1e-3, 0.1, 0.5, 1.0, 10.0, 100.0];

/// Axioms, uniform mollified bounds, representation identities and the
/// Lipschitz table of `φ` for one law.
pub fn run_graph_check(law: &LawConfig, dim: usize, seed: u64) -> Result<GraphCheck> {
    let g = law.build(dim)?;
    graph_check(&g, seed, AXIOM_SAMPLES, IDENTITY_SAMPLES)
}

pub fn graph_check(law: &GraphLaw, seed: u64, axiom_samples: usize, identity_samples: usize) -> Result<GraphCheck> {
    let axioms = law.check_axioms(axiom_samples, seed);
    let bounds = mollified_bounds(law, 64, axiom_samples / 10, seed);
    let identities = law.check_identities(identity_samples, seed)?;
    let phi = law.phi_lipschitz(&PHI_LEVELS, seed)?;
    let pass = axioms.passes()
        && bounds.stable(BOUNDS_TOL)
        && identities.phi_residual <= IDENTITY_TOL
        && identities.split_residual <= IDENTITY_TOL
        && identities.g_residual <= IDENTITY_TOL
        && phi.iter().all(|r| r.lipschitz <= 1.0 + PHI_TOL);
    Ok(GraphCheck {
        axioms,
        bounds,
        identities,
        phi,
        pass,
    })
}

impl GraphCheck {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let a = &self.axioms;
        let mut t = Table::new(&[
            "law",
            "samples",
            "zero_at_zero",
            "min_monotonicity",
            "c1",
            "k",
            "c2",
            "m",
            "growth_exponent",
        ]);
        t.row([
            a.law.clone(),
            a.samples.to_string(),
            a.zero_at_zero.to_string(),
            num(a.min_monotonicity),
            num(a.c1),
            num(a.k),
            num(a.c2),
            num(a.m),
            num(a.growth_exponent),
        ]);
        save(dir, "axioms.csv", &t.finish())?;

        let mut t = Table::new(&["n", "c1", "k", "c2", "m", "min_monotonicity"]);
        for r in &self.bounds.rows {
            let c = &r.constants;
            t.row([r.n.to_string(), num(c.c1), num(c.k), num(c.c2), num(c.m), num(r.min_monotonicity)]);
        }
        save(dir, "bounds.csv", &t.finish())?;

        let i = &self.identities;
        let mut t = Table::new(&["samples", "phi_residual", "split_residual", "g_residual"]);
        t.row([i.samples.to_string(), num(i.phi_residual), num(i.split_residual), num(i.g_residual)]);
        save(dir, "identities.csv", &t.finish())?;

        let mut t = Table::new(&["chi_norm", "phi_norm", "lipschitz"]);
        for r in &self.phi {
            t.row([num(r.chi_norm), num(r.phi_norm), num(r.lipschitz)]);
        }
        save(dir, "phi.csv", &t.finish())
    }
}

// ---------------------------------------------------------------- inf-sup

#[derive(Debug, Clone, Serialize)]
pub struct InfSupRow {
    pub pair: String,
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub beta: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfSupSweep {
    pub rows: Vec<InfSupRow>,
    /// Largest `|β_{k+1} − β_k| / β_k` per pair.
    pub variation: Vec<(String, f64)>,
    pub pass: bool,
}

/// Allowed level-to-level variation of `β`.
pub const BETA_VARIATION: f64 = 0.2;

/// `β` on the unit square with `n = base·2^k`, `k < levels`.
pub fn run_infsup(pairs: &[PairKind], base: usize, levels: usize) -> Result<InfSupSweep> {
    let mut rows = Vec::new();
    let mut variation = Vec::new();
    for &kind in pairs {
        let mut betas = Vec::new();
        for k in 0..levels {
            let n = base << k;
            let pair = SpacePair::new(Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n)?), kind)?;
            let rep = inf_sup_constant(&pair)?;
            log::info!("{} n = {n}: β = {:.6}", kind.name(), rep.beta);
            betas.push(rep.beta);
            rows.push(InfSupRow {
                pair: kind.name().to_string(),
                n,
                h: pair.mesh().h_max(),
                dofs: pair.num_velocity() + pair.num_pressure(),
                beta: rep.beta,
                iterations: rep.iterations,
            });
        }
        let v = betas
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[0])
            .fold(0.0, f64::max);
        variation.push((kind.name().to_string(), v));
    }
    let pass = rows.iter().all(|r| r.beta > 0.0) && variation.iter().all(|v| v.1 < BETA_VARIATION);
    Ok(InfSupSweep { rows, variation, pass })
}

impl InfSupSweep {
    pub fn csv(&self) -> String {
        let mut t = Table::new(&["pair", "n", "h", "dofs", "beta"]);
        for r in &self.rows {
            t.row([r.pair.clone(), r.n.to_string(), num(r.h), r.dofs.to_string(), num(r.beta)]);
        }
        t.finish()
    }
}
