//! Python bindings: meshes, constitutive laws, discrete spaces, the solver
//! and the diagnostic drivers.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyArithmeticError, PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use monoflow_core::constitutive::{GraphLaw, LawKind, MollifiedLaw};
use monoflow_core::elements::{PairKind, SpacePair};
use monoflow_core::harness::{self, LawConfig, StudyConfig};
use monoflow_core::linalg::{Mat3, Vec3};
use monoflow_core::manufactured::Manufactured;
use monoflow_core::mesh::{read_ascii, write_ascii, BoxDomain, Triangulation};
use monoflow_core::system::{self, DiscreteSolution, SolverOptions};
use monoflow_core::Error;

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::NumericalFailure { .. } | Error::Infeasible(_) => PyArithmeticError::new_err(msg),
        Error::NotFound(_) => PyFileNotFoundError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for monoflow_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

// ------------------------------------------------------------------- mesh

/// Conforming simplicial mesh.
#[pyclass(name = "Mesh", module = "monoflow", skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<Triangulation>,
}

#[pymethods]
impl PyMesh {
    /// Uniform `n × n` mesh of a rectangle.
    #[staticmethod]
    #[pyo3(signature = (n, x0=0.0, x1=1.0, y0=0.0, y1=1.0))]
    fn rectangle(n: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> PyResult<Self> {
        let tri = Triangulation::build_uniform(&BoxDomain::rect(x0, x1, y0, y1), n).py()?;
        Ok(Self { inner: Arc::new(tri) })
    }

    /// Union of axis-aligned boxes `[x0, x1, y0, y1]` meshed at spacing `h`.
    #[staticmethod]
    fn union(boxes: Vec<[f64; 4]>, h: f64) -> PyResult<Self> {
        let boxes: Vec<BoxDomain> = boxes.iter().map(|b| BoxDomain::rect(b[0], b[1], b[2], b[3])).collect();
        let tri = Triangulation::build_union(&boxes, h).py()?;
        Ok(Self { inner: Arc::new(tri) })
    }

    /// Reads the native ASCII format, or legacy VTK by extension.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(harness::load_mesh(&path).py()?) })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(read_ascii(text).py()?) })
    }

    fn to_text(&self) -> String {
        write_ascii(&self.inner)
    }

    fn refine(&self) -> Self {
        Self { inner: Arc::new(self.inner.refine_uniform()) }
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.inner.h_max()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.total_measure()
    }

    #[getter]
    fn shape_constant(&self) -> f64 {
        self.inner.shape_constant()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|v| (v[0], v[1])).collect()
    }

    fn cells(&self) -> Vec<Vec<usize>> {
        (0..self.inner.num_cells()).map(|c| self.inner.cell(c).to_vec()).collect()
    }

    /// Containing cell and barycentric coordinates of `(x, y)`.
    fn locate(&self, x: f64, y: f64) -> PyResult<(usize, [f64; 3])> {
        let (c, lam) = self.inner.locate(&[x, y, 0.0]).py()?;
        Ok((c, [lam[0], lam[1], lam[2]]))
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, cells={}, h_max={:.4})",
            self.inner.num_vertices(),
            self.inner.num_cells(),
            self.inner.h_max()
        )
    }
}

// -------------------------------------------------------------------- law

fn mat(m: [[f64; 3]; 3]) -> Mat3 {
    m
}

/// Maximal monotone constitutive graph with its selection.
#[pyclass(name = "Law", module = "monoflow", skip_from_py_object)]
#[derive(Clone)]
struct PyLaw {
    inner: GraphLaw,
}

#[pymethods]
impl PyLaw {
    #[new]
    #[pyo3(signature = (name, mu=None, tau=None, r=None, dim=2))]
    fn new(name: &str, mu: Option<f64>, tau: Option<f64>, r: Option<f64>, dim: usize) -> PyResult<Self> {
        let kind = LawKind::from_name(name, mu, tau, r).py()?;
        Ok(Self { inner: GraphLaw::new(kind, dim).py()? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r()
    }

    #[getter]
    fn single_valued(&self) -> bool {
        self.inner.is_single_valued()
    }

    /// Selection `S*(δ)` for a symmetric 3×3 shear rate.
    fn stress(&self, delta: [[f64; 3]; 3]) -> PyResult<[[f64; 3]; 3]> {
        self.inner.eval_selection(&mat(delta)).py()
    }

    /// Mollified stress `Sⁿ(δ)`.
    fn mollified_stress(&self, delta: [[f64; 3]; 3], n: u32) -> PyResult<[[f64; 3]; 3]> {
        if n == 0 {
            return Err(PyValueError::new_err("mollification index must be at least 1"));
        }
        MollifiedLaw::new(self.inner, n).eval(&mat(delta)).py()
    }

    /// `|S*(δ)|` as a function of `|δ|`.
    fn radial(&self, t: f64) -> f64 {
        self.inner.radial(t)
    }

    #[pyo3(signature = (samples=10_000, seed=0))]
    fn check_axioms<'py>(&self, py: Python<'py>, samples: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let a = py.detach(|| self.inner.check_axioms(samples, seed));
        let d = PyDict::new(py);
        d.set_item("samples", a.samples)?;
        d.set_item("zero_at_zero", a.zero_at_zero)?;
        d.set_item("min_monotonicity", a.min_monotonicity)?;
        d.set_item("c1", a.c1)?;
        d.set_item("k", a.k)?;
        d.set_item("c2", a.c2)?;
        d.set_item("m", a.m)?;
        d.set_item("growth_exponent", a.growth_exponent)?;
        d.set_item("passes", a.passes())?;
        Ok(d)
    }

    #[pyo3(signature = (samples=1_000, seed=0))]
    fn check_identities<'py>(&self, py: Python<'py>, samples: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.check_identities(samples, seed).py()?;
        let d = PyDict::new(py);
        d.set_item("samples", r.samples)?;
        d.set_item("phi_residual", r.phi_residual)?;
        d.set_item("split_residual", r.split_residual)?;
        d.set_item("g_residual", r.g_residual)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Law({:?})", self.inner.kind)
    }
}

// ------------------------------------------------------------------ space

/// Velocity–pressure finite element pair on a mesh.
#[pyclass(name = "Space", module = "monoflow", skip_from_py_object)]
#[derive(Clone)]
struct PySpace {
    inner: Arc<SpacePair>,
}

#[pymethods]
impl PySpace {
    #[new]
    #[pyo3(signature = (mesh, pair="mini"))]
    fn new(mesh: &PyMesh, pair: &str) -> PyResult<Self> {
        let kind = PairKind::from_name(pair).py()?;
        Ok(Self { inner: Arc::new(SpacePair::new(mesh.inner.clone(), kind).py()?) })
    }

    #[getter]
    fn pair(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn num_velocity(&self) -> usize {
        self.inner.num_velocity()
    }

    #[getter]
    fn num_pressure(&self) -> usize {
        self.inner.num_pressure()
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh { inner: self.inner.mesh_arc().clone() }
    }

    /// Discrete inf-sup constant `β`.
    fn inf_sup(&self, py: Python<'_>) -> PyResult<f64> {
        Ok(py.detach(|| system::inf_sup_constant(&self.inner)).py()?.beta)
    }

    /// Velocity and gradient of coefficient vector `u` at `(x, y)`.
    fn velocity_at(&self, u: Vec<f64>, x: f64, y: f64) -> PyResult<((f64, f64), [[f64; 2]; 2])> {
        self.check_len(&u)?;
        let (c, lam) = self.inner.mesh().locate(&[x, y, 0.0]).py()?;
        let (v, g) = self.inner.velocity_at(&u, c, &lam);
        Ok(((v[0], v[1]), [[g[0][0], g[0][1]], [g[1][0], g[1][1]]]))
    }

    /// `‖∇u‖_2`-type norm `‖u‖_{1,2}`.
    fn h1_norm(&self, u: Vec<f64>) -> PyResult<f64> {
        self.check_len(&u)?;
        Ok(system::h1_norm(&self.inner, &u))
    }

    /// Skew-symmetric convection form `B[v, w, h]`.
    fn trilinear(&self, v: Vec<f64>, w: Vec<f64>, h: Vec<f64>) -> PyResult<f64> {
        system::trilinear_skew(&self.inner, &v, &w, &h).py()
    }

    /// Random vertex field supported in a disk around the centre.
    #[pyo3(signature = (amplitude=0.7, radius=0.25, seed=0))]
    fn rough_field(&self, amplitude: f64, radius: f64, seed: u64) -> Vec<f64> {
        harness::rough_field(&self.inner, amplitude, radius, seed)
    }

    /// Lipschitz truncations of `u` at each level.
    fn truncate<'py>(&self, py: Python<'py>, u: Vec<f64>, lambdas: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        self.check_len(&u)?;
        let s = py.detach(|| harness::truncation_sweep(&self.inner, &u, &lambdas, None)).py()?;
        let d = PyDict::new(py);
        d.set_item("gradient_constant", s.gradient_constant)?;
        d.set_item("weak_type_constant", s.weak_type_constant)?;
        d.set_item("whitney_pass", s.whitney_pass)?;
        d.set_item("coincidence_residual", s.coincidence_residual)?;
        d.set_item("csv", s.csv())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Space(pair={}, velocity_dofs={}, pressure_dofs={})",
            self.inner.kind().name(),
            self.inner.num_velocity(),
            self.inner.num_pressure()
        )
    }
}

impl PySpace {
    fn check_len(&self, u: &[f64]) -> PyResult<()> {
        if u.len() != self.inner.num_velocity() {
            return Err(PyValueError::new_err(format!(
                "expected {} velocity coefficients, got {}",
                self.inner.num_velocity(),
                u.len()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- solving

/// Discrete velocity and pressure with solver statistics.
#[pyclass(name = "Solution", module = "monoflow", get_all)]
struct PySolution {
    u: Vec<f64>,
    p: Vec<f64>,
    iterations: usize,
    constraint_residual: f64,
    n_mollify: Option<u32>,
    /// `(‖u − U‖_{1,r}, ‖u − U‖_{1,2}, ‖p − P‖_{r̃})` for manufactured runs.
    errors: Option<(f64, f64, f64)>,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        match self.errors {
            Some((a, b, c)) => format!("Solution(iterations={}, errors=({a:.4e}, {b:.4e}, {c:.4e}))", self.iterations),
            None => format!("Solution(iterations={})", self.iterations),
        }
    }
}

fn solution(sol: DiscreteSolution, errors: Option<(f64, f64, f64)>) -> PySolution {
    PySolution {
        iterations: sol.iterations,
        constraint_residual: sol.constraint_residual,
        n_mollify: sol.n_mollify,
        u: sol.u,
        p: sol.p,
        errors,
    }
}

/// Solves the discrete flow problem. The body force is either a callable
/// `f(x, y) -> (fx, fy)` or, with `manufactured=A`, the force of the
/// built-in exact solution of amplitude `A` (errors are then reported).
#[pyfunction]
#[pyo3(signature = (space, law, force=None, manufactured=None, options=None))]
fn solve(
    py: Python<'_>,
    space: &PySpace,
    law: &PyLaw,
    force: Option<Py<PyAny>>,
    manufactured: Option<f64>,
    options: Option<&str>,
) -> PyResult<PySolution> {
    let opts: SolverOptions = match options {
        Some(t) => toml::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SolverOptions::default(),
    };
    let pair = &space.inner;
    let law = law.inner;
    match (force, manufactured) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give either a force or a manufactured amplitude")),
        (None, Some(a)) => {
            let m = Manufactured::new(law, a, opts.convection != system::Convection::None);
            let (sol, e) = py
                .detach(|| {
                    let sol = system::solve(pair, &law, &|x: &Vec3| m.force(x), &opts)?;
                    let r = law.r();
                    let e = system::solution_errors(
                        pair,
                        &sol.u,
                        &sol.p,
                        &m,
                        &|x| m.pressure(x),
                        r,
                        system::r_tilde(r, pair.dim()),
                    );
                    Ok((sol, e))
                })
                .py()?;
            Ok(solution(sol, Some((e.velocity_w1r, e.velocity_h1, e.pressure))))
        }
        (f, None) => {
            let failure: Mutex<Option<PyErr>> = Mutex::new(None);
            let eval = |x: &Vec3| -> Vec3 {
                let Some(f) = &f else { return [0.0; 3] };
                Python::attach(|py| {
                    let out = f
                        .bind(py)
                        .call1((x[0], x[1]))
                        .and_then(|v| v.extract::<(f64, f64)>().map_err(Into::into));
                    match out {
                        Ok((a, b)) => [a, b, 0.0],
                        Err(e) => {
                            failure.lock().unwrap().get_or_insert(e);
                            [f64::NAN; 3]
                        }
                    }
                })
            };
            let sol = py.detach(|| system::solve(pair, &law, &eval, &opts));
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
            Ok(solution(sol.py()?, None))
        }
    }
}

/// Runs a convergence study from a TOML configuration; returns the CSV
/// table and the pass flag. Reports are also written under `out`.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn run_study<'py>(py: Python<'py>, config: &str, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = StudyConfig::from_toml(config).py()?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let report = py.detach(|| harness::run_study(&cfg)).py()?;
    let d = PyDict::new(py);
    d.set_item("csv", report.csv())?;
    d.set_item("pass", report.flags.pass)?;
    d.set_item("velocity_rates", report.velocity_rates.clone())?;
    d.set_item("pressure_rates", report.pressure_rates.clone())?;
    d.set_item("failure", report.failure.as_ref().map(|f| f.message.clone()))?;
    d.set_item("report", report.to_toml())?;
    Ok(d)
}

/// Axioms, mollified bounds and representation identities of a law.
#[pyfunction]
#[pyo3(signature = (name, mu=None, tau=None, r=None, seed=0, out=None))]
fn graph_check<'py>(
    py: Python<'py>,
    name: &str,
    mu: Option<f64>,
    tau: Option<f64>,
    r: Option<f64>,
    seed: u64,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = LawConfig { name: name.into(), mu, tau, r };
    let g = py.detach(|| harness::run_graph_check(&cfg, 2, seed)).py()?;
    if let Some(dir) = out {
        g.write(&dir).py()?;
    }
    let d = PyDict::new(py);
    d.set_item("pass", g.pass)?;
    d.set_item("min_monotonicity", g.axioms.min_monotonicity)?;
    d.set_item("c2", g.axioms.c2)?;
    d.set_item("bounds_variation", g.bounds.last_pair_variation)?;
    d.set_item(
        "identity_residual",
        g.identities.phi_residual.max(g.identities.split_residual).max(g.identities.g_residual),
    )?;
    Ok(d)
}

/// Inf-sup constants of several pairs on `base · 2^k` meshes.
#[pyfunction]
#[pyo3(signature = (pairs, base=4, levels=3))]
fn inf_sup_sweep(py: Python<'_>, pairs: Vec<String>, base: usize, levels: usize) -> PyResult<(bool, String)> {
    let kinds = pairs.iter().map(|p| PairKind::from_name(p)).collect::<monoflow_core::Result<Vec<_>>>().py()?;
    let s = py.detach(|| harness::run_infsup(&kinds, base, levels)).py()?;
    Ok((s.pass, s.csv()))
}

/// Writes velocity, pressure, shear rate and stress as legacy VTK.
#[pyfunction]
fn export_vtk(space: &PySpace, law: &PyLaw, sol: &PySolution, path: PathBuf) -> PyResult<()> {
    let model = monoflow_core::constitutive::StressModel::Selection(law.inner);
    let text = harness::export_fields(&space.inner, &model, &sol.u, &sol.p, "monoflow");
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| PyValueError::new_err("bad path"))?;
    harness::save(dir, name, &text).py()
}

#[pymodule]
fn monoflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m` (also used when embedding).
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyLaw>()?;
    m.add_class::<PySpace>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(graph_check, m)?)?;
    m.add_function(wrap_pyfunction!(inf_sup_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(export_vtk, m)?)?;
    m.add("PAIRS", PairKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
