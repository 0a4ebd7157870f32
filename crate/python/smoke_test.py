"""Smoke test for the gridcell_py extension module.

Build with `maturin develop -m crates/python/Cargo.toml --features extension-module`
or copy the compiled cdylib next to this file as gridcell_py.so.
"""

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import gridcell_py as gc


def main():
    p = gc.success_probability(0.6, 5.55e-4)
    assert 0.97 < p < 0.98, p

    r = gc.rho_min(1.6e-3)
    assert 0.0 < r < 1.0
    assert abs(gc.success_probability(r, 1.6e-3) - 0.95) < 1e-6

    try:
        gc.rho_min(4e-3)
    except gc.InfeasibleLoadError as e:
        print("infeasible as expected:", e)
    else:
        raise AssertionError("expected InfeasibleLoadError")

    s = gc.schedule()
    assert len(s["g"]) == 24 and len(s["storage"]) == 25
    assert max(range(24), key=lambda k: s["g"][k]) == 5
    myopic = gc.schedule(rule="myopic")
    print(f"total cost: over-purchase {s['total_cost']:.6e}, myopic {myopic['total_cost']:.6e}")

    try:
        gc.schedule(overrides=["mu=3"])
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    try:
        gc.run("oracle", tempfile.mkdtemp(), overrides=["dp_budget=10"])
    except gc.BudgetExceededError:
        pass
    else:
        raise AssertionError("expected BudgetExceededError")

    with tempfile.TemporaryDirectory() as out:
        files = gc.run("analyze", out, seed=1)
        assert sorted(files) == ["coverage.csv", "run.json", "thresholds.csv"], files
        with open(os.path.join(out, "run.json")) as f:
            assert json.load(f)["manifest"]["command"] == "analyze"

    print("smoke test passed")


if __name__ == "__main__":
    main()
