use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyModule;

fn run(script: &str) -> PyResult<()> {
    Python::attach(|py| {
        let m = PyModule::new(py, "monoflow")?;
        monoflow::register(&m)?;
        py.import("sys")?.getattr("modules")?.set_item("monoflow", &m)?;
        py.run(&CString::new(script).unwrap(), None, None)
    })
}

#[test]
fn classes_and_functions_are_exposed() {
    run(r#"
import monoflow as mf
mesh = mf.Mesh.rectangle(4)
assert mesh.num_cells == 32, mesh
space = mf.Space(mesh, "p2-p0")
assert space.num_velocity > 0 and space.pair == "p2-p0"
law = mf.Law("power-law", mu=0.5, r=3.0)
assert abs(law.r - 3.0) < 1e-15
sol = mf.solve(space, law, manufactured=1.0)
assert len(sol.p) == space.num_pressure
assert sol.errors[0] > 0.0
assert "guzman-neilan" in mf.PAIRS
"#)
    .unwrap();
}

#[test]
fn library_errors_map_to_python_exceptions() {
    run(r#"
import monoflow as mf
for bad in (lambda: mf.Law("nope"), lambda: mf.Space(mf.Mesh.rectangle(2), "q2-q1"),
            lambda: mf.run_study("[mesh]\nlevels = 0\n")):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("accepted")
try:
    mf.Mesh.read("/nonexistent/mesh.txt")
except OSError:
    pass
else:
    raise AssertionError("missing file accepted")
"#)
    .unwrap();
}
