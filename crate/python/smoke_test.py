"""Smoke test for the rbf_pum_py extension module.

Build and install first, e.g.

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release
"""

import math

import rbf_pum_py as rp


def rotation_field():
    # (-y, x) on the unit square is div-free with potential r^2 / 2
    nodes, values = [], []
    for i in range(30):
        for j in range(30):
            x, y = i / 29, j / 29
            nodes.append([x, y])
            values.append([-y, x])
    a = rp.Approximant(nodes, values, surface="plane", kernel="imq", eps=5.0, q=8.0)
    pots, fields = a.eval([[0.5, 0.5], [0.25, 0.75]])
    for (x, y), f in zip([[0.5, 0.5], [0.25, 0.75]], fields):
        assert abs(f[0] + y) < 2e-3 and abs(f[1] - x) < 2e-3, f
    assert abs((pots[0] - pots[1]) - (0.25 - 0.3125)) < 1e-3
    assert a.num_patches == len(a.patches()) > 1
    assert a.max_local_residual < 1e-8
    print("plane fit:", a)


def sphere_problem():
    nodes = rp.problem_nodes("sphere", 3000, seed=1)
    values = rp.problem_field("sphere", nodes)
    a = rp.Approximant(nodes, values, surface="sphere", kernel="matern4", eps=7.5, q=9.0, delta=9 / 16)
    pts = rp.problem_nodes("sphere", 500, seed=2)
    fields = a.field(pts)
    exact = rp.problem_field("sphere", pts)
    err = max(math.dist(f, u) for f, u in zip(fields, exact))
    scale = max(math.hypot(*u) for u in exact)
    assert err / scale < 1e-2, err / scale
    for p, f in zip(pts, fields):
        assert abs(sum(a * b for a, b in zip(p, f))) < 1e-10
    print(f"sphere fit: {a.num_patches} patches, relative max error {err / scale:.2e}")


def experiment():
    rows = rp.run_experiment("ball", [1000, 2000, 4000], trials=1, eval_n=2000)
    errs = [r["err_field_2"] for r in rows]
    c, r2 = rp.fit_rate([r["n"] for r in rows], errs, model="superalgebraic", dim=3)
    assert errs[0] > errs[-1] and c > 0
    print(f"ball experiment: errors {errs}, C = {c:.3f}, R^2 = {r2:.3f}")


def errors():
    try:
        rp.Approximant([[0, 0]], [[1, 0]], surface="torus")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad surface accepted")


if __name__ == "__main__":
    rotation_field()
    sphere_problem()
    experiment()
    errors()
    print("ok")
