#!/usr/bin/env python3
"""Smoke test for the eotlab Python extension.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p eotlab-py --release` (or a debug build), exposes it as an
importable module, and exercises the main entry points on a small instance.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libeotlab_py.so", "libeotlab_py.dylib", "eotlab_py.dll")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit(
        "eotlab_py cdylib not found; run `cargo build -p eotlab-py --release` first"
    )


def import_module():
    lib = locate_cdylib()
    staging = Path(tempfile.mkdtemp(prefix="eotlab-py-"))
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy2(lib, staging / f"eotlab{suffix}")
    sys.path.insert(0, str(staging))
    import eotlab  # noqa: E402

    return eotlab


CONFIG = """
[instance]
id = smoke
dimension = 1
source_domain = box 0 1
target_domain = box 0 1
source_density = uniform
target_density = uniform
resolution = 32

[sweep]
epsilons = 0.2 0.1 0.05 0.02
tol = 1e-9
max_iter = 200000
"""


def main() -> None:
    eotlab = import_module()

    # closed-form exponent helpers
    assert eotlab.beta_from_alpha(1.0, 1) == 0.25
    assert eotlab.beta_from_alpha(1.0, 2) == 0.25
    assert abs(eotlab.beta_from_alpha(0.5, 1) - 1.0 / 9.0) < 1e-15
    assert eotlab.p0_from_alpha(1.0) == 2.0
    assert eotlab.p0_from_alpha(0.5) == 3.0

    # one solve on the identity instance
    sol = eotlab.solve(CONFIG, epsilon=0.1)
    assert sol.marginal_residual <= 1e-9, sol.marginal_residual
    assert abs(sol.primal_value - (sol.dual_value + sol.epsilon)) <= 1e-6 * (
        1.0 + abs(sol.primal_value)
    )
    g = sol.grad_u([0.5])
    assert abs(g[0] - 0.5) < 1e-8, g
    h = sol.hessian_u([0.5])
    assert h[0][0] > 0.0
    rho_diag = sol.plan_density([0.5], [0.5])
    rho_off = sol.plan_density([0.5], [0.9])
    assert rho_off < rho_diag

    # the eps = 0 reference of the identity instance is the identity map
    w2sq, mapping = eotlab.reference(CONFIG)
    assert abs(w2sq) < 1e-12, w2sq
    nodes = sol.source_nodes()
    worst = max(abs(m[0] - x[0]) for m, x in zip(mapping, nodes))
    assert worst < 1e-12, worst

    # a short sweep end to end
    csv, summary, gates_ok = eotlab.sweep(CONFIG)
    assert csv.splitlines()[0].startswith("epsilon,gap,")
    assert len(csv.splitlines()) == 1 + 4
    assert "[PASS]" in summary
    assert gates_ok, summary

    print("eotlab python smoke test: OK")
    print(f"  residual {sol.marginal_residual:.2e}, grad_u(0.5) = {g[0]:.6f}")
    print(f"  w2sq = {w2sq:.2e}, sweep rows = {len(csv.splitlines()) - 1}")
    assert math.isfinite(sol.entropic_cost())


if __name__ == "__main__":
    main()
