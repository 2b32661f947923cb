"""Smoke test for the Python bindings.

Build and install the extension first, e.g.

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/monoflow-*.whl
"""

import math
import tempfile

import monoflow as mf


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)
    print("ok  ", msg)


def main():
    mesh = mf.Mesh.rectangle(8)
    check(mesh.num_cells == 128, f"uniform mesh has 128 cells: {mesh!r}")
    check(abs(mesh.area - 1.0) < 1e-14, "unit square area")
    fine = mesh.refine()
    check(fine.num_cells == 4 * mesh.num_cells, "refinement quadruples cells")
    back = mf.Mesh.from_text(mesh.to_text())
    check(back.num_vertices == mesh.num_vertices, "ascii round trip")
    cell, lam = mesh.locate(0.3, 0.6)
    check(abs(sum(lam) - 1.0) < 1e-12, "barycentric coordinates sum to one")

    law = mf.Law("herschel-bulkley", mu=0.5, tau=0.2, r=2.5)
    axioms = law.check_axioms(samples=2000, seed=1)
    check(axioms["min_monotonicity"] >= -1e-12, "monotone graph")
    ids = law.check_identities(samples=200, seed=1)
    check(max(ids["phi_residual"], ids["split_residual"], ids["g_residual"]) < 1e-10, "identities")
    delta = [[0.1, 0.2, 0.0], [0.2, -0.1, 0.0], [0.0, 0.0, 0.0]]
    s = law.stress(delta)
    check(abs(s[0][1] - s[1][0]) < 1e-15, "symmetric stress")
    try:
        law.stress([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        raise AssertionError("non-symmetric shear rate accepted")
    except ValueError:
        print("ok   non-symmetric shear rate rejected")

    space = mf.Space(mesh, "mini")
    beta = space.inf_sup()
    check(beta > 0.1, f"inf-sup constant {beta:.4f}")

    newtonian = mf.Law("newtonian", mu=0.5)
    sol = mf.solve(space, newtonian, manufactured=10.0)
    check(sol.errors is not None and sol.errors[1] < 1.0, f"manufactured solve {sol!r}")
    rot = mf.solve(space, newtonian, force=lambda x, y: (y - 0.5, 0.5 - x))
    check(len(rot.u) == space.num_velocity, "callable body force")
    try:
        mf.solve(space, newtonian, force=lambda x, y: 1 / 0)
        raise AssertionError("force error swallowed")
    except ZeroDivisionError:
        print("ok   force exceptions propagate")

    u = space.rough_field(amplitude=0.7, radius=0.25, seed=3)
    sweep = space.truncate(u, [4.0, 8.0])
    check(sweep["whitney_pass"] and sweep["coincidence_residual"] <= 1e-12, "truncation")

    g = mf.graph_check("bingham", mu=0.5, tau=0.3, seed=2)
    check(g["pass"], "bingham graph check")

    with tempfile.TemporaryDirectory() as out:
        res = mf.run_study("[mesh]\nbase = 4\nlevels = 2\n", out)
        header = res["csv"].splitlines()[0]
        check(header == "level,h,dofs,err_u,err_p,beta,norm_u,norm_S", "study csv header")
        check(all(math.isfinite(r) for r in res["velocity_rates"]), "study rates")
        mf.export_vtk(space, newtonian, sol, f"{out}/sol.vtk")

    try:
        mf.run_study("[mesh]\nlevels = 0\n")
        raise AssertionError("invalid config accepted")
    except ValueError:
        print("ok   invalid config rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
