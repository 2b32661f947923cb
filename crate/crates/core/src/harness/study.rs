//! Convergence studies on nested meshes.

use std::sync::Arc;

use serde::Serialize;

use super::config::{DomainKind, ReferenceKind, StudyConfig};
use super::export::{export_fields, num, save, write_field_file, Table};
use crate::constitutive::GraphLaw;
use crate::elements::{SpacePair, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};
use crate::manufactured::Manufactured;
use crate::mesh::Triangulation;
use crate::system::{
    an_diagnostic, inf_sup_constant, Convection, r_tilde, solution_errors, solution_norms, solve, DiscreteSolution,
    Force,
};

pub const STUDY_HEADER: [&str; 8] = ["level", "h", "dofs", "err_u", "err_p", "beta", "norm_u", "norm_S"];

/// Observed convergence rate `log₂(e_k / e_{k+1})` must reach this for
/// linear laws.
pub const MIN_RATE: f64 = 0.8;
/// Allowed level-to-level growth of the a-priori norms.
pub const NORM_GROWTH: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    /// `‖u − U‖_{1,r}`.
    pub err_u: f64,
    /// `‖u − U‖_{1,2}`.
    pub err_u_h1: f64,
    /// `‖p − P‖_{r̃}`.
    pub err_p: f64,
    /// Inf-sup estimate, NaN when not requested.
    pub beta: f64,
    pub norm_u: f64,
    pub norm_s: f64,
    pub korn_ratio: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
    /// `(ε, |{|aₙ| > ε}|)`.
    pub an_exceedance: Vec<(f64, f64)>,
    /// `(θ, ∫|aₙ|^θ)`.
    pub an_integrals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub level: usize,
    pub message: String,
    /// Numerical (as opposed to input) failure.
    pub numerical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyFlags {
    pub velocity_decreasing: bool,
    pub pressure_decreasing: bool,
    /// Smallest observed velocity rate (NaN with a single level).
    pub min_velocity_rate: f64,
    /// Rate threshold met; only enforced for linear laws.
    pub rate_ok: bool,
    /// Largest level-to-level relative growth of `‖U‖_{1,r}`, `‖S‖_{r′}`.
    pub norm_growth: f64,
    pub norms_bounded: bool,
    /// `aₙ` exceedance measures and integrals strictly decrease (vacuous
    /// when the diagnostic is off).
    pub an_decreasing: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub seed: u64,
}

impl Fingerprint {
    pub fn current(seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub pair: String,
    pub law: String,
    pub r: f64,
    pub r_tilde: f64,
    pub reference: String,
    /// Caveat recorded for surrogate references.
    pub reference_note: Option<String>,
    pub rows: Vec<StudyRow>,
    /// `log₂` of consecutive velocity error ratios.
    pub velocity_rates: Vec<f64>,
    pub pressure_rates: Vec<f64>,
    pub flags: StudyFlags,
    pub failure: Option<Failure>,
    pub environment: Fingerprint,
}

impl StudyReport {
    /// `study.csv`: bit-stable given fixed inputs (no timings).
    pub fn csv(&self) -> String {
        let mut t = Table::new(&STUDY_HEADER);
        for r in &self.rows {
            t.row([
                r.level.to_string(),
                num(r.h),
                r.dofs.to_string(),
                num(r.err_u),
                num(r.err_p),
                num(r.beta),
                num(r.norm_u),
                num(r.norm_s),
            ]);
        }
        t.finish()
    }

    /// `an.csv`: one row per level and threshold/exponent.
    pub fn an_csv(&self) -> String {
        let mut t = Table::new(&["level", "quantity", "parameter", "value"]);
        for r in &self.rows {
            for &(e, m) in &r.an_exceedance {
                t.row([r.level.to_string(), "exceedance".into(), num(e), num(m)]);
            }
            for &(th, v) in &r.an_integrals {
                t.row([r.level.to_string(), "integral".into(), num(th), num(v)]);
            }
        }
        t.finish()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# report serialisation failed: {e}\n"))
    }
}

/// Discrete velocity evaluated at arbitrary points by point location.
pub struct LocatedVelocity<'a> {
    pub pair: &'a SpacePair,
    pub u: &'a [f64],
}

impl VectorField for LocatedVelocity<'_> {
    fn value(&self, x: &Vec3) -> Vec3 {
        match self.pair.mesh().locate(x) {
            Ok((c, lam)) => self.pair.velocity_at(self.u, c, &lam).0,
            Err(_) => ZERO3,
        }
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        match self.pair.mesh().locate(x) {
            Ok((c, lam)) => self.pair.velocity_at(self.u, c, &lam).1,
            Err(_) => ZERO33,
        }
    }
}

fn located_pressure(pair: &SpacePair, p: &[f64], x: &Vec3) -> f64 {
    match pair.mesh().locate(x) {
        Ok((c, lam)) => pair.pressure_at(p, c, &lam),
        Err(_) => 0.0,
    }
}

/// Body force of the configured problem: the manufactured force on the
/// unit square, otherwise a rigid rotation about the bounding-box centre.
pub fn body_force(cfg: &StudyConfig, law: &GraphLaw) -> Result<Box<Force<'static>>> {
    Ok(match cfg.domain.kind {
        DomainKind::UnitSquare => {
            let m = Manufactured::new(*law, cfg.reference.amplitude, cfg.solver.convection != Convection::None);
            Box::new(move |x: &Vec3| m.force(x))
        }
        DomainKind::Boxes => Box::new(rotational_force(&cfg.build_mesh(0)?, cfg.reference.amplitude)),
    })
}

fn rotational_force(tri: &Triangulation, amplitude: f64) -> impl Fn(&Vec3) -> Vec3 + Sync {
    let (lo, hi) = tri.bounding_box();
    let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    move |x: &Vec3| [-amplitude * (x[1] - c[1]), amplitude * (x[0] - c[0]), 0.0]
}

struct Level {
    pair: SpacePair,
    sol: DiscreteSolution,
}

fn solve_level(cfg: &StudyConfig, law: &GraphLaw, k: usize, force: &Force<'_>) -> Result<Level> {
    let tri = Arc::new(cfg.build_mesh(k)?);
    let pair = SpacePair::new(tri, cfg.pair.kind)?;
    let sol = solve(&pair, law, force, &cfg.solver)?;
    log::info!(
        "level {k}: {} cells, {} iterations, residual {:.3e}",
        pair.mesh().num_cells(),
        sol.iterations,
        sol.history.last().copied().unwrap_or(0.0)
    );
    Ok(Level { pair, sol })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn rates(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn flags(law: &GraphLaw, cfg: &StudyConfig, rows: &[StudyRow], failed: bool) -> StudyFlags {
    let eu: Vec<f64> = rows.iter().map(|r| r.err_u).collect();
    let ep: Vec<f64> = rows.iter().map(|r| r.err_p).collect();
    let vr = rates(&eu);
    let min_rate = vr.iter().copied().fold(f64::NAN, f64::min);
    let rate_ok = !law.is_linear() || vr.iter().all(|&r| r >= MIN_RATE);
    let growth = |f: fn(&StudyRow) -> f64| rows.windows(2).map(|w| f(&w[1]) / f(&w[0]) - 1.0).fold(0.0, f64::max);
    let norm_growth = growth(|r| r.norm_u).max(growth(|r| r.norm_s));
    let an_decreasing = !cfg.diagnostics.an
        || (0..cfg.diagnostics.an_eps.len()).all(|i| {
            strictly_decreasing(&rows.iter().map(|r| r.an_exceedance[i].1).collect::<Vec<_>>())
        }) && (0..cfg.diagnostics.an_thetas.len()).all(|i| {
            strictly_decreasing(&rows.iter().map(|r| r.an_integrals[i].1).collect::<Vec<_>>())
        });
    let velocity_decreasing = strictly_decreasing(&eu);
    let pressure_decreasing = strictly_decreasing(&ep);
    let norms_bounded = norm_growth < NORM_GROWTH;
    StudyFlags {
        velocity_decreasing,
        pressure_decreasing,
        min_velocity_rate: min_rate,
        rate_ok,
        norm_growth,
        norms_bounded,
        an_decreasing,
        pass: !failed && velocity_decreasing && pressure_decreasing && rate_ok && norms_bounded && an_decreasing,
    }
}

/// Solves on `L` nested meshes, measures errors against the configured
/// reference and writes `study.csv`, `an.csv`, `report.toml` (and VTK per
/// level) into the output directory.
///
/// Validation errors are returned as `Err`; failures while solving end the
/// study early and are recorded in the report.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let dim = cfg.dim();
    let law = cfg.law.build(dim)?;
    let rt = r_tilde(law.r(), dim);
    let levels = cfg.mesh.levels;
    let manufactured = Manufactured::new(law, cfg.reference.amplitude, cfg.solver.convection != Convection::None);

    // surrogate reference: one level finer than the study
    let force = body_force(cfg, &law)?;
    let reference: Option<Level> = match cfg.reference.kind {
        ReferenceKind::Manufactured => None,
        ReferenceKind::Surrogate => {
            let reference = solve_level(cfg, &law, levels, force.as_ref());
            match reference {
                Ok(r) => Some(r),
                Err(e) => {
                    let failure = Failure {
                        level: levels,
                        message: e.to_string(),
                        numerical: matches!(e, Error::NumericalFailure { .. } | Error::Infeasible(_)),
                    };
                    let report = finish(cfg, &law, rt, Vec::new(), Some(failure));
                    persist(cfg, &report)?;
                    return Ok(report);
                }
            }
        }
    };

    let mut rows = Vec::new();
    let mut failure = None;
    for k in 0..levels {
        let level = match solve_level(cfg, &law, k, force.as_ref()) {
            Ok(l) => l,
            Err(e) => {
                log::error!("level {k} failed: {e}");
                failure = Some(Failure {
                    level: k,
                    message: e.to_string(),
                    numerical: matches!(e, Error::NumericalFailure { .. } | Error::Infeasible(_)),
                });
                break;
            }
        };
        match measure_level(cfg, &law, rt, k, &level, &manufactured, reference.as_ref()) {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(Failure {
                    level: k,
                    message: e.to_string(),
                    numerical: true,
                });
                break;
            }
        }
        if cfg.output.vtk {
            let model = level.sol.model(&law);
            let vtk = export_fields(&level.pair, &model, &level.sol.u, &level.sol.p, &format!("level {k}"));
            save(&cfg.output.dir, &format!("level{k}.vtk"), &vtk)?;
            save(
                &cfg.output.dir,
                &format!("level{k}.field"),
                &write_field_file(&level.pair, &level.sol.u, &level.sol.p),
            )?;
        }
    }
    let report = finish(cfg, &law, rt, rows, failure);
    persist(cfg, &report)?;
    Ok(report)
}

fn persist(cfg: &StudyConfig, report: &StudyReport) -> Result<()> {
    save(&cfg.output.dir, "study.csv", &report.csv())?;
    if cfg.diagnostics.an {
        save(&cfg.output.dir, "an.csv", &report.an_csv())?;
    }
    save(&cfg.output.dir, "report.toml", &report.to_toml())
}

fn measure_level(
    cfg: &StudyConfig,
    law: &GraphLaw,
    rt: f64,
    k: usize,
    level: &Level,
    manufactured: &Manufactured,
    reference: Option<&Level>,
) -> Result<StudyRow> {
    let (pair, sol) = (&level.pair, &level.sol);
    let located;
    let (exact_u, exact_p): (&dyn VectorField, Box<dyn Fn(&Vec3) -> f64 + Sync>) = match reference {
        None => (manufactured, Box::new(|x: &Vec3| manufactured.pressure(x))),
        Some(r) => {
            located = LocatedVelocity { pair: &r.pair, u: &r.sol.u };
            let (rp, pp) = (&r.pair, &r.sol.p);
            (&located, Box::new(move |x: &Vec3| located_pressure(rp, pp, x)))
        }
    };
    let errs = solution_errors(pair, &sol.u, &sol.p, exact_u, exact_p.as_ref(), law.r(), rt);
    let model = sol.model(law);
    let norms = solution_norms(pair, &model, &sol.u);
    let beta = if cfg.diagnostics.infsup {
        inf_sup_constant(pair)?.beta
    } else {
        f64::NAN
    };
    let (an_exceedance, an_integrals) = if cfg.diagnostics.an {
        let a = an_diagnostic(
            pair,
            &model,
            law,
            &sol.u,
            exact_u,
            &cfg.diagnostics.an_eps,
            &cfg.diagnostics.an_thetas,
        );
        (a.exceedance, a.integrals)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(StudyRow {
        level: k,
        h: pair.mesh().h_max(),
        dofs: pair.num_velocity() + pair.num_pressure(),
        err_u: errs.velocity_w1r,
        err_u_h1: errs.velocity_h1,
        err_p: errs.pressure,
        beta,
        norm_u: norms.velocity,
        norm_s: norms.stress,
        korn_ratio: norms.korn_ratio,
        iterations: sol.iterations,
        constraint_residual: sol.constraint_residual,
        an_exceedance,
        an_integrals,
    })
}

fn finish(cfg: &StudyConfig, law: &GraphLaw, rt: f64, rows: Vec<StudyRow>, failure: Option<Failure>) -> StudyReport {
    let flags = flags(law, cfg, &rows, failure.is_some());
    let (reference, note) = match cfg.reference.kind {
        ReferenceKind::Manufactured => ("manufactured".to_string(), None),
        ReferenceKind::Surrogate => (
            "surrogate".to_string(),
            Some(format!(
                "errors measured against the discrete solution on level {}; they include the reference's own error",
                cfg.mesh.levels
            )),
        ),
    };
    StudyReport {
        pair: cfg.pair.kind.name().to_string(),
        law: cfg.law.name.clone(),
        r: law.r(),
        r_tilde: rt,
        reference,
        reference_note: note,
        velocity_rates: rates(&rows.iter().map(|r| r.err_u).collect::<Vec<_>>()),
        pressure_rates: rates(&rows.iter().map(|r| r.err_p).collect::<Vec<_>>()),
        rows,
        flags,
        failure,
        environment: Fingerprint::current(cfg.seed),
    }
}
