"""Smoke test for the numinv Python module. Run after `pip install -e crates/py`."""

import json
import math
from pathlib import Path

import numinv

ROOT = Path(__file__).resolve().parents[1]


def check_static():
    s = numinv.FiniteSpace([0.3, 0.7])
    assert abs(s.rel([2.0, 1.0], [1.0, 2.0]) + 0.05) < 1e-12
    assert s.prefers([1.0, 1.0], [1.0, 2.0]) == "strictly_preferred"
    assert s.prefers([1.0, 2.0], [1.0, 2.0]) == "preferred"
    suite = numinv.counterexamples(0.3)
    nt = next(f for f in suite["families"] if f["name"] == "non_transitive")
    fh = next(c for c in nt["cases"] if c["numerator"] == "f" and c["denominator"] == "h")
    assert abs(fh["actual"] - 0.7 / 0.6) < 1e-12


def check_choice():
    s = numinv.FiniteSpace([0.2, 0.3, 0.5])
    mu = [1.0, 2.0, 4.0]
    best = s.full_simplex_optimum(mu)
    assert all(abs(x - w / m) < 1e-8 for x, w, m in zip(best, s.weights, mu))
    opt = s.log_optimal([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert opt["certificate"] <= 1e-9
    assert max(abs(a - b) for a, b in zip(s.recover()["weights"], s.weights)) < 1e-8


def check_tree():
    t = numinv.EventTree.random(seed=3, depth=4)
    q = t.random_measure(seed=4)
    pair = t.decompose(q)
    report = t.verify_pair(q, pair["l"], pair["k"])
    assert report["passed"], report
    table = t.perturbation(q)
    assert table["monotone"]
    lattice = numinv.EventTree.lattice(2, [0.5, 0.5])
    assert len(lattice) == 7 and lattice.depth == 2


def check_mc():
    e = numinv.PathEnsemble("gbm", 2000, 2000, 0.01, seed=1)
    doob = e.doob(tol=0.05)
    assert doob["passed"], doob
    b = numinv.PathEnsemble("inverse_bessel3", 2000, 100, 0.01, seed=2, fractions=[0.0, 1.0])
    law = b.exp_law(mean_tol=0.1)
    assert law["k_below_one"]
    assert b.min_time(tol=0.05)["rows"][0]["mean"]["mean"] == 1.0
    assert all(math.isfinite(x) for x in b.maxima)


def check_runner():
    text = (ROOT / "crates/core/scenarios/decompose_smoke.json").read_text()
    report = numinv.run_scenario(text, module="decompose", seed=5)
    assert report["passed"] and report["seed"] == 5
    json.dumps(report)
    try:
        numinv.run_scenario('{"version": 99, "checks": []}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad scenario accepted")


if __name__ == "__main__":
    for check in (check_static, check_choice, check_tree, check_mc, check_runner):
        check()
        print(f"ok {check.__name__}")
