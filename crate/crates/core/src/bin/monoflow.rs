//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 checks failed or other error, 2 invalid input,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use monoflow_core::elements::{PairKind, SpacePair};
use monoflow_core::harness::{
    body_force, export_fields, level_table, load_mesh, read_field_file, run_graph_check, run_infsup, run_study,
    run_truncation_demo, save, truncation_sweep, write_field_file, LawConfig, StudyConfig,
};
use monoflow_core::mesh::{write_ascii, write_vtk, BoxDomain, Triangulation};
use monoflow_core::system::{solution_norms, solve};
use monoflow_core::Error;

#[derive(Parser)]
#[command(name = "monoflow", version, about = "Incompressible flows with monotone constitutive graphs")]
struct Cli {
    /// Seed for every randomized step (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (1 gives bit-reproducible output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a single mesh level and write the field and VTK.
    Solve {
        /// TOML configuration; built-in defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Level to solve on (default: the finest configured).
        #[arg(long)]
        level: Option<usize>,
    },
    /// Convergence study over nested meshes.
    Study {
        /// TOML configuration; built-in defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Lipschitz truncation of a stored field, or the built-in demonstration.
    Truncate {
        /// TOML configuration; built-in defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Field file written by `solve`; without it the demonstration runs.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Truncation levels (repeatable).
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
        /// Level selection up to this `j` (field mode).
        #[arg(long)]
        j_max: Option<u32>,
        /// Exponent of the level selection.
        #[arg(long, default_value_t = 2.0)]
        s: f64,
    },
    /// Constitutive axioms, mollified bounds and representation identities.
    GraphCheck {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Inf-sup constants over refined unit-square meshes.
    Infsup {
        /// Pairs to test (repeatable; default mini and p2-p0).
        #[arg(long = "pair")]
        pairs: Vec<String>,
        #[arg(long, default_value_t = 4)]
        base: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshCommand,
    },
}

#[derive(Args)]
struct LawArgs {
    #[arg(long, default_value = "newtonian")]
    law: String,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Uniform mesh of the unit square or a union of rectangles.
    Build {
        /// Subdivisions of the longest box side.
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// `x0,x1,y0,y1` (repeatable; default the unit square).
        #[arg(long = "box", value_delimiter = ',')]
        boxes: Vec<f64>,
        output: PathBuf,
    },
    /// Uniform red refinement.
    Refine {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        times: usize,
    },
    /// Convert between the ASCII (`.mesh`) and VTK (`.vtk`) formats.
    Convert { input: PathBuf, output: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::InvalidArgument(_) | Error::Parse { .. } | Error::Unsupported(_) => 2,
        Error::NumericalFailure { .. } | Error::Infeasible(_) => 3,
        Error::NotFound(_) | Error::Io { .. } => 1,
    }
}

fn load_config(path: Option<&Path>, cli: &Cli) -> monoflow_core::Result<StudyConfig> {
    let mut cfg = match path {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_mesh(tri: &Triangulation, path: &Path) -> monoflow_core::Result<()> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("vtk") => write_vtk(tri, "monoflow mesh", &[]),
        _ => write_ascii(tri),
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("mesh");
    save(dir, name, &text)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn pass(ok: bool) -> monoflow_core::Result<u8> {
    Ok(if ok { 0 } else { 1 })
}

fn run(cli: &Cli) -> monoflow_core::Result<u8> {
    match &cli.command {
        Command::Solve { config, level } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let k = level.unwrap_or(cfg.mesh.levels - 1);
            let law = cfg.law.build(cfg.dim())?;
            let pair = SpacePair::new(Arc::new(cfg.build_mesh(k)?), cfg.pair.kind)?;
            let force = body_force(&cfg, &law)?;
            let sol = solve(&pair, &law, force.as_ref(), &cfg.solver)?;
            let model = sol.model(&law);
            let norms = solution_norms(&pair, &model, &sol.u);
            let dir = &cfg.output.dir;
            save(dir, "solution.field", &write_field_file(&pair, &sol.u, &sol.p))?;
            save(dir, "solution.vtk", &export_fields(&pair, &model, &sol.u, &sol.p, "solution"))?;
            println!(
                "solved: {} cells, {} iterations ({} Newton, {} Picard), ‖U‖ = {:.6e}, ‖S‖ = {:.6e}",
                pair.mesh().num_cells(),
                sol.iterations,
                sol.newton_steps,
                sol.picard_steps,
                norms.velocity,
                norms.stress
            );
            Ok(0)
        }
        Command::Study { config } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let report = run_study(&cfg)?;
            emit(&report.csv());
            let f = &report.flags;
            println!(
                "velocity decreasing: {}, pressure decreasing: {}, min rate: {:.3}, norm growth: {:.3}, aₙ decreasing: {}",
                f.velocity_decreasing, f.pressure_decreasing, f.min_velocity_rate, f.norm_growth, f.an_decreasing
            );
            if let Some(fail) = &report.failure {
                eprintln!("level {} failed: {}", fail.level, fail.message);
                return Ok(if fail.numerical { 3 } else { 1 });
            }
            pass(f.pass)
        }
        Command::Truncate {
            config,
            field,
            lambdas,
            j_max,
            s,
        } => {
            let cfg = load_config(config.as_deref(), cli)?;
            let dir = cfg.output.dir.clone();
            match field {
                None => {
                    let demo = run_truncation_demo(&cfg)?;
                    emit(&demo.sweep.csv());
                    emit(&demo.table.csv());
                    pass(demo.sweep.whitney_pass && demo.table.bounds_ok)
                }
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    let f = read_field_file(&text)?;
                    let lams = if lambdas.is_empty() { &cfg.truncation.lambdas } else { lambdas };
                    let sweep = truncation_sweep(&f.pair, &f.u, lams, Some(&dir))?;
                    save(&dir, "truncation.csv", &sweep.csv())?;
                    emit(&sweep.csv());
                    let mut ok = sweep.whitney_pass;
                    if let Some(j) = j_max {
                        let table = level_table(&f.pair, &[f.u.clone()], *s, *j, cfg.truncation.kappa)?;
                        save(&dir, "levels.csv", &table.csv())?;
                        emit(&table.csv());
                        ok &= table.bounds_ok;
                    }
                    pass(ok)
                }
            }
        }
        Command::GraphCheck { law, dim } => {
            let lc = LawConfig {
                name: law.law.clone(),
                mu: law.mu,
                tau: law.tau,
                r: law.r,
            };
            let report = run_graph_check(&lc, *dim, cli.seed.unwrap_or(0))?;
            report.write(&out_dir(cli))?;
            let a = &report.axioms;
            println!(
                "{}: monotonicity {:.3e}, c1 {:.4}, c2 {:.4}, growth exponent {:.4}, bounds variation {:.3e}, identities {:.2e}/{:.2e}/{:.2e}",
                a.law,
                a.min_monotonicity,
                a.c1,
                a.c2,
                a.growth_exponent,
                report.bounds.last_pair_variation,
                report.identities.phi_residual,
                report.identities.split_residual,
                report.identities.g_residual
            );
            pass(report.pass)
        }
        Command::Infsup { pairs, base, levels } => {
            let kinds = if pairs.is_empty() {
                vec![PairKind::Mini, PairKind::P2P0]
            } else {
                pairs.iter().map(|p| PairKind::from_name(p)).collect::<monoflow_core::Result<_>>()?
            };
            if *base == 0 || *levels == 0 {
                return Err(Error::Validation("base and levels must be positive".into()));
            }
            let sweep = run_infsup(&kinds, *base, *levels)?;
            save(&out_dir(cli), "infsup.csv", &sweep.csv())?;
            emit(&sweep.csv());
            pass(sweep.pass)
        }
        Command::Mesh { action } => {
            let resolve = |p: &PathBuf| match &cli.out {
                Some(d) if p.is_relative() => d.join(p),
                _ => p.clone(),
            };
            match action {
                MeshCommand::Build { n, boxes, output } => {
                    if boxes.len() % 4 != 0 {
                        return Err(Error::Validation("--box takes x0,x1,y0,y1".into()));
                    }
                    let tri = if boxes.is_empty() {
                        Triangulation::build_uniform(&BoxDomain::unit(2), *n)?
                    } else {
                        let list: Vec<BoxDomain> =
                            boxes.chunks(4).map(|b| BoxDomain::rect(b[0], b[1], b[2], b[3])).collect();
                        let extent = list
                            .iter()
                            .map(|b| (b.hi[0] - b.lo[0]).max(b.hi[1] - b.lo[1]))
                            .fold(0.0, f64::max);
                        Triangulation::build_union(&list, extent / (*n).max(1) as f64)?
                    };
                    write_mesh(&tri, &resolve(output))?;
                    println!("{} vertices, {} cells", tri.num_vertices(), tri.num_cells());
                }
                MeshCommand::Refine { input, output, times } => {
                    let mut tri = load_mesh(input)?;
                    for _ in 0..*times {
                        tri = tri.refine_uniform();
                    }
                    write_mesh(&tri, &resolve(output))?;
                    println!("{} vertices, {} cells", tri.num_vertices(), tri.num_cells());
                }
                MeshCommand::Convert { input, output } => {
                    let tri = load_mesh(input)?;
                    write_mesh(&tri, &resolve(output))?;
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
