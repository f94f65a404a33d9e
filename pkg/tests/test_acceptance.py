"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers
and then asserts. Run ``pytest -v tests/test_acceptance.py`` or execute this
file directly to get the ten lines without pytest.
"""
import math
import sys
import time

import numpy as np

from spdmeans.cli import run_command
from spdmeans.counterex import EDGE_BOUNDS, REFERENCE_RECT
from spdmeans.harness import (
    COND_RANGE,
    conjecture_explore,
    lie_trotter_errors,
    random_orthogonal,
    random_problem,
    random_spd,
    run_suite,
    shape_for,
    strictly_decreasing_margin,
    trial_rng,
)
from spdmeans.means2 import G_LINEAR, spectral_mean_t
from spdmeans.meansm import MeanProblem, SolverOptions, wasserstein_mean
from spdmeans.pdcore import thompson
from spdmeans.speqsolve import explore_solutions, flow_derivative_check, random_start, solve_equation

SEED = 20240611
T_GRID = [k / 10 for k in range(1, 10)]


def report(capsys, number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


def test_criterion_01_counterexample(capsys):
    t0 = time.perf_counter()
    code, rep = run_command(["counterexample", "reproduce"])
    elapsed = time.perf_counter() - t0
    r = rep["results"]
    ext = r["certificate"]["edge_extrema"]
    ratios = {k: ext[k] / EDGE_BOUNDS[k] for k in EDGE_BOUNDS}
    X0 = np.asarray(r["X0"], dtype=float)
    checks = {
        "exit 0": code == 0,
        "X0 = diag(e^3, e^-3)": np.allclose(X0, np.diag([math.e**3, math.e**-3]), rtol=1e-14),
        "|Phi(X0)| <= 1e-12": r["residual_X0"] <= 1e-12,
        "certified": r["certificate"]["certified"],
        "edge bounds": r["certificate"]["meets_reference_bounds"],
        "X* in R": REFERENCE_RECT.contains(r["u_star"], r["v_star"]),
        "|Phi(X*)| <= 1e-10": r["residual_X_star"] <= 1e-10,
        "d_T(X*, X0) > 0.1": r["thompson_X_star_X0"] > 0.1,
        "< 10 s": elapsed < 10.0,
    }
    ok = all(checks.values())
    bad = [k for k, v in checks.items() if not v]
    report(capsys, 1, ok,
           f"|Phi(X0)|={r['residual_X0']:.1e} |Phi(X*)|={r['residual_X_star']:.1e} "
           f"d_T={r['thompson_X_star_X0']:.3f} edge/bound ratios "
           + " ".join(f"{k}={v:.2f}" for k, v in ratios.items())
           + f" time={elapsed:.2f}s" + (f" failed: {bad}" if bad else ""))
    assert ok, bad


def test_criterion_02_two_variable_recovery(capsys):
    t0 = time.perf_counter()
    worst, misses = 0.0, 0
    for k in range(100):
        rng = trial_rng(SEED, k)
        n = 2 + k % 4
        lo, hi = (math.log(c) for c in COND_RANGE)
        A = random_spd(n, math.exp(rng.uniform(lo, hi)), rng)
        B = random_spd(n, math.exp(rng.uniform(lo, hi)), rng)
        for t in T_GRID:
            out = solve_equation(MeanProblem([1 - t, t], [A, B]))
            d = thompson(out.solution, spectral_mean_t(A, B, t)) if out.converged else math.inf
            worst = max(worst, d)
            misses += d > 1e-8
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and elapsed < 60.0
    report(capsys, 2, ok, f"900 solves, worst d_T={worst:.1e}, misses={misses}, time={elapsed:.1f}s")
    assert ok


def test_criterion_03_wasserstein_equivalence(capsys):
    t0 = time.perf_counter()
    worst_d, worst_drop, misses = 0.0, 0.0, 0
    for k in range(100):
        P = random_problem(trial_rng(SEED + 1, k), *shape_for(k))
        W = wasserstein_mean(P)
        S = solve_equation(P, G_LINEAR)
        d = thompson(S.solution, W.solution) if S.converged and W.converged else math.inf
        tr = W.info["traces"]
        # X_1 = K(X_0) onward; the start is not in the image of K
        drop = max((a - b) / max(1.0, abs(a)) for a, b in zip(tr[1:], tr[2:]))
        worst_d, worst_drop = max(worst_d, d), max(worst_drop, drop)
        misses += d > 1e-8 or drop > 1e-10
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and elapsed < 60.0
    report(capsys, 3, ok, f"100 instances, worst d_T={worst_d:.1e}, worst trace drop={worst_drop:.1e}, "
                          f"misses={misses}, time={elapsed:.1f}s")
    assert ok


def test_criterion_04_karcher(capsys):
    rep = run_suite("karcher-props", 100, SEED, SolverOptions(tol=1e-12), tol=1e-9)
    ok = rep.ok
    report(capsys, 4, ok, f"{rep.passes}/100 (residual <= 1e-12 enforced), "
                          f"min property margin {rep.min_margin:.1e}")
    assert ok, rep.failures[:1]


def test_criterion_05_order_chains(capsys):
    reps = [run_suite(s, 200, SEED, tol=1e-9) for s in ("two-var-chain", "multi-chain")]
    ok = all(r.ok for r in reps)
    report(capsys, 5, ok, "; ".join(f"{r.suite} {r.passes}/200" for r in reps))
    assert ok


def test_criterion_06_solution_set_theorems(capsys):
    suites = ("gamma-props", "gamma-bounds", "near-sandwich", "le-major", "trace-prop", "power-cmp")
    reps = [run_suite(s, 100, SEED, tol=1e-9) for s in suites]
    ok = all(r.ok for r in reps)
    report(capsys, 6, ok, "; ".join(f"{r.suite} {r.passes}/100" for r in reps))
    assert ok


def test_criterion_07_lie_trotter(capsys):
    margins = []
    for k in range(20):
        P = random_problem(trial_rng(SEED + 7, k), *shape_for(k), (2.0, 20.0))
        errs = lie_trotter_errors(P, SolverOptions())
        margins.append(min(strictly_decreasing_margin(v) for v in errs.values()))
    ok = min(margins) > 0
    report(capsys, 7, ok, f"20 instances x 3 means, smallest relative drop {min(margins):.3f}")
    assert ok


def test_criterion_08_flow_derivative(capsys):
    worst, rates = 0.0, []
    for k in range(50):
        rng = trial_rng(SEED + 8, k)
        P = random_problem(rng, *shape_for(k))
        X = random_start(rng, P.n, *P.bounds())
        eye = 0.5 * np.eye(P.n)
        worst = max(worst, float(np.linalg.norm(flow_derivative_check(P, X, 1e-5) + eye)))
        e = [float(np.linalg.norm(flow_derivative_check(P, X, h) + eye))
             for h in (1e-3, 5e-4, 2.5e-4)]
        rates += [math.log2(a / b) for a, b in zip(e, e[1:])]
    ok = worst <= 1e-6 and min(rates) >= 1.8 and max(rates) <= 2.2
    report(capsys, 8, ok, f"50 pairs, worst |D + I/2|={worst:.1e} at h=1e-5, "
                          f"observed order {min(rates):.2f}..{max(rates):.2f}")
    assert ok


def test_criterion_09_uniqueness_near_identity(capsys):
    counts, failures = [], 0
    t0 = time.perf_counter()
    for k in range(50):
        rng = trial_rng(SEED + 9, k)
        n, m = shape_for(k)
        As = []
        for _ in range(m):
            Q = random_orthogonal(rng, n)
            As.append((Q * rng.uniform(0.9, 1.1, n)) @ Q.T)
        S = explore_solutions(MeanProblem.uniform(As), n_starts=64, seed=k)
        counts.append(len(S))
        failures += S.failures
    elapsed = time.perf_counter() - t0
    ok = all(c == 1 for c in counts)
    report(capsys, 9, ok, f"50 instances x 64 starts, cluster counts {sorted(set(counts))}, "
                          f"failed starts {failures}, time={elapsed:.1f}s")
    assert ok


def test_criterion_10_conjectures(capsys):
    reps = [conjecture_explore(c, 500, SEED) for c in ("s-wlog-omega", "p-power-sp")]
    ok = all(r.violations == 0 and r.skipped == 0 for r in reps)
    report(capsys, 10, ok, "; ".join(
        f"{r.conjecture}: {r.violations} violations, min slack {r.min_slack:.1e}, "
        f"mean min slack {r.mean_min_slack:.1e}" for r in reps) + " (evidence only)")
    assert ok


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(None)
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
