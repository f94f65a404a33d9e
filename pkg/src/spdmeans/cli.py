"""
Command-line interface
~~~~~~~~~~~~~~~~~~~~~~
``spdmeans <command> ...``; run ``spdmeans <command> --help`` for details.

Exit codes: 0 success, 1 usage or input error, 2 a solver did not converge,
3 a certificate or property check failed. Each command builds a report; it
goes to ``--out`` (written atomically) or to stdout. ``gen`` and
``counterexample build`` emit a problem file instead. Reports for identical
arguments and inputs are byte-identical apart from the ``timing`` block.
"""
from __future__ import annotations

import argparse
import sys
import time
import warnings
from typing import Optional, Sequence

import numpy as np

from . import counterex, harness
from .fileio import (
    InputError,
    dumps,
    parse_problem,
    problem_to_dict,
    read_matrix_file,
    sha256_file,
    write_json,
)
from .means2 import (
    f_arithmetic,
    f_geometric,
    geo_mean_t,
    parse_f,
    parse_g,
    spectral_mean_t,
    verify_alt_equation,
    wasserstein2_t,
    alt_mean,
)
from .meansm import (
    MeanProblem,
    SolverOptions,
    elementary_mean,
    generalized_karcher,
    karcher_mean,
    power_mean,
    wasserstein_mean,
)
from .speqsolve import CLUSTER_RADIUS, explore_solutions, solve_equation

EXIT_OK, EXIT_INPUT, EXIT_NONCONV, EXIT_CERT = 0, 1, 2, 3
COMPARISON_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-12, help="residual target (default 1e-12)")
    p.add_argument("--max-iter", type=int, default=500, help="iteration cap (default 500)")
    p.add_argument("--input", help="problem file (JSON)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--threads", type=int, default=1, help="worker threads where supported")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spdmeans", description="Means of positive definite matrices.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mean", help="multivariable mean of a problem file")
    p.add_argument("--kind", required=True, choices=[
        "arithmetic", "harmonic", "log-euclidean", "karcher", "power", "wasserstein", "generalized"])
    p.add_argument("--t", type=float, help="power mean order")
    p.add_argument("--g", default="log", help="generator for --kind generalized")
    _common(p)

    p = sub.add_parser("mean2", help="two-variable mean of the first two matrices")
    p.add_argument("--kind", required=True, choices=["geo", "spectral", "wasserstein", "alt"])
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--f", help="representing function for --kind alt (NAME or NAME:T)")
    _common(p)

    p = sub.add_parser("solve", help="solve sum_i w_i g(A_i # X^-1) = 0")
    p.add_argument("--g", default="log")
    p.add_argument("--x0", help="starting matrix file")
    p.add_argument("--starts", type=int, help="multistart count (switches to explore)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="fixed_point", choices=["fixed_point", "newton"])
    _common(p)

    p = sub.add_parser("explore", help="multistart search of the solution set")
    p.add_argument("--g", default="log")
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="fixed_point,newton",
                   help="comma-separated subset of fixed_point,newton")
    _common(p)

    p = sub.add_parser("counterexample", help="the three-matrix instance with two solutions")
    p.add_argument("action", choices=["build", "reproduce", "certify"])
    p.add_argument("--rect", help="u_lo,u_hi,v_lo,v_hi (certify)")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--margin", type=float, default=1e-6)
    _common(p)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", required=True, choices=list(harness.SUITES))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check-tol", type=float, default=COMPARISON_TOL,
                   help="comparison tolerance of the suite (default 1e-9)")
    _common(p)

    p = sub.add_parser("conjecture", help="search for violations of an open statement")
    p.add_argument("--id", required=True, choices=list(harness.CONJECTURES))
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, help="fix the number of matrices")
    _common(p)

    p = sub.add_parser("gen", help="write a random problem file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--cond", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    _common(p)
    return ap


def _opts(a) -> SolverOptions:
    try:
        return SolverOptions(tol=a.tol, max_iter=a.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _problem(a) -> MeanProblem:
    if not a.input:
        raise UsageError(f"{a.command}: --input is required")
    return parse_problem(a.input)


def _outcome(out) -> dict:
    return {"solution": out.solution, "residual": out.residual,
            "iterations": out.iterations, "converged": out.converged}


def _cmd_mean(a, rep):
    P, opts = _problem(a), _opts(a)
    kind = a.kind
    rep["citations"] = [f"mean: {kind}"]
    if kind in ("arithmetic", "harmonic", "log-euclidean"):
        rep["results"] = {"solution": elementary_mean(kind, P)}
        return EXIT_OK
    if kind == "karcher":
        out = karcher_mean(P, opts)
    elif kind == "power":
        if a.t is None:
            raise UsageError("mean --kind power needs --t")
        out = power_mean(P, a.t, opts)
    elif kind == "wasserstein":
        out = wasserstein_mean(P, opts)
    else:
        out = generalized_karcher(P, parse_g(a.g), opts)
    rep["results"] = _outcome(out)
    if kind == "wasserstein":
        rep["results"]["equation_residual"] = out.info["equation_residual"]
    return EXIT_OK if out.converged else EXIT_NONCONV


def _cmd_mean2(a, rep):
    P = _problem(a)
    if P.m < 2:
        raise InputError("mean2 needs at least two matrices")
    A, B, t = P.matrices[0], P.matrices[1], a.t
    res: dict = {}
    if a.kind == "geo":
        X = geo_mean_t(A, B, t)
    elif a.kind == "spectral":
        X = spectral_mean_t(A, B, t)
        res["equation_residual"] = verify_alt_equation(A, B, f_geometric(t), X)
    elif a.kind == "wasserstein":
        X = wasserstein2_t(A, B, t)
        res["equation_residual"] = verify_alt_equation(A, B, f_arithmetic(t), X)
    else:
        if not a.f:
            raise UsageError("mean2 --kind alt needs --f")
        f = parse_f(a.f, t)
        X = alt_mean(A, B, f)
        res["equation_residual"] = verify_alt_equation(A, B, f, X)
    res["solution"] = X
    rep["results"] = res
    rep["citations"] = [f"two-variable mean: {a.kind}"]
    return EXIT_OK


def _cmd_solve(a, rep):
    if a.starts is not None:
        a.methods = "fixed_point,newton"
        return _cmd_explore(a, rep)
    P, opts, g = _problem(a), _opts(a), parse_g(a.g)
    X0 = read_matrix_file(a.x0) if a.x0 else None
    if a.x0:
        rep["inputs"][a.x0] = sha256_file(a.x0)
    out = solve_equation(P, g, X0, opts, method=a.method)
    rep["results"] = _outcome(out)
    lo, hi = P.bounds()
    rep["results"]["bounds"] = [lo, hi]
    rep["citations"] = ["sum_i w_i g(A_i # X^-1) = 0"]
    return EXIT_OK if out.converged else EXIT_NONCONV


def _cmd_explore(a, rep):
    P, opts, g = _problem(a), _opts(a), parse_g(a.g)
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in ("fixed_point", "newton")]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}")
    S = explore_solutions(P, g, a.starts, a.seed, opts, methods, threads=a.threads)
    rep["results"] = {
        "clusters": [{"representative": c.representative, "count": c.count,
                      "spread": c.spread, "residual": c.residual, "methods": c.methods,
                      "first_start": c.first_start} for c in S.clusters],
        "starts": S.starts, "attempts": S.attempts, "failures": S.failures,
    }
    rep["tolerances"]["cluster_radius"] = CLUSTER_RADIUS
    rep["citations"] = ["solution set of sum_i w_i g(A_i # X^-1) = 0 (multistart)"]
    return EXIT_OK if S.clusters else EXIT_NONCONV


def _certificate(r: "counterex.MirandaReport") -> dict:
    return {"certified": r.certified, "rect": [r.rect.u_lo, r.rect.u_hi, r.rect.v_lo, r.rect.v_hi],
            "samples_per_edge": r.samples_per_edge, "margin": r.margin,
            "edge_extrema": r.edge_extrema, "edge_ok": r.edge_ok,
            "reference_bounds": counterex.EDGE_BOUNDS,
            "meets_reference_bounds": r.meets_bounds(),
            "method": "sampling with margin (not interval arithmetic)"}


def _cmd_counterexample(a, rep):
    A1, A2, A3, X0, w = counterex.build_instance()
    rep["citations"] = ["three-matrix instance with two distinct spectral mean solutions"]
    if a.action == "build":
        P = MeanProblem(w, [A1, A2, A3])
        rep["emit"] = problem_to_dict(P, ["A1", "A2", "A3"])
        return EXIT_OK
    if a.action == "certify":
        if a.rect:
            try:
                vals = [float(x) for x in a.rect.split(",")]
                rect = counterex.Rect2(*vals)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"--rect: expected u_lo,u_hi,v_lo,v_hi ({exc})") from None
        else:
            rect = counterex.REFERENCE_RECT
        if a.samples < 2 or a.margin < 0:
            raise UsageError("--samples must be >= 2 and --margin >= 0")
        r = counterex.miranda_certify(rect, a.samples, a.margin)
        rep["results"] = _certificate(r)
        return EXIT_OK if r.certified else EXIT_CERT
    R = counterex.reproduce(a.samples, a.margin, _opts(a))
    s = R.second
    rep["results"] = {
        "X0": X0,
        "residual_X0": R.residual_x0,
        "residual_X0_eigen_path": R.residual_x0_generic,
        "certificate": _certificate(R.certificate),
        "X_star": s.X, "u_star": s.u, "v_star": s.v, "F_star": list(s.F),
        "residual_X_star": s.residual, "thompson_X_star_X0": s.distance_to_x0,
        "det_X_star": float(np.linalg.det(s.X)),
        "newton_converged": s.converged, "in_rectangle": counterex.REFERENCE_RECT.contains(s.u, s.v),
        "reproduced": R.ok,
    }
    if not s.converged:
        return EXIT_NONCONV
    return EXIT_OK if R.ok else EXIT_CERT


def _failure_dict(f) -> dict:
    return {"trial": f.trial, "seed": f.seed, "margin": f.margin, "message": f.message,
            "instance": f.instance}


def _cmd_verify(a, rep):
    if a.trials < 1:
        raise UsageError("--trials must be at least 1")
    r = harness.run_suite(a.suite, a.trials, a.seed, _opts(a), tol=a.check_tol)
    rep["results"] = {"suite": r.suite, "trials": r.trials, "passes": r.passes,
                      "min_margin": r.min_margin, "notes": r.notes,
                      "failures": [_failure_dict(f) for f in r.failures]}
    rep["tolerances"]["comparison"] = a.check_tol
    rep["citations"] = [r.citation]
    rep["timing"]["suite_seconds"] = r.wall_time
    return EXIT_OK if r.ok else EXIT_CERT


def _cmd_conjecture(a, rep):
    if a.trials < 1:
        raise UsageError("--trials must be at least 1")
    r = harness.conjecture_explore(a.id, a.trials, a.seed, a.m, _opts(a))
    rep["results"] = {"conjecture": r.conjecture, "trials": r.trials, "violations": r.violations,
                      "skipped": r.skipped, "min_slack": r.min_slack,
                      "mean_min_slack": r.mean_min_slack, "extremal": r.extremal,
                      "label": r.label}
    rep["tolerances"]["violation"] = r.tol
    rep["citations"] = [r.statement]
    rep["timing"]["explore_seconds"] = r.wall_time
    return EXIT_OK


def _cmd_gen(a, rep):
    if a.n < 1 or a.m < 1 or a.cond < 1:
        raise UsageError("gen needs n >= 1, m >= 1 and cond >= 1")
    rng = np.random.default_rng(a.seed)
    mats = [harness.random_spd(a.n, a.cond, rng) for _ in range(a.m)]
    P = MeanProblem.uniform(mats)
    rep["emit"] = problem_to_dict(P)
    return EXIT_OK


COMMANDS = {
    "mean": _cmd_mean, "mean2": _cmd_mean2, "solve": _cmd_solve, "explore": _cmd_explore,
    "counterexample": _cmd_counterexample, "verify": _cmd_verify,
    "conjecture": _cmd_conjecture, "gen": _cmd_gen,
}


def run_command(argv: Sequence[str]) -> tuple[int, dict]:
    """Parse and run one command; returns ``(exit code, report)``."""
    argv = list(argv)
    report: dict = {"command": argv, "inputs": {}, "results": {}, "citations": [],
                    "tolerances": {}, "timing": {}}
    try:
        a = build_parser().parse_args(argv)
        report["tolerances"].update(tol=a.tol, max_iter=a.max_iter, inner_tol=a.tol / 100,
                                    comparison=COMPARISON_TOL)
        if a.input:
            report["inputs"][a.input] = sha256_file(a.input)
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[a.command](a, report)
        if caught:
            report["warnings"] = [str(w.message) for w in caught]
        report["timing"]["wall_seconds"] = time.perf_counter() - t0
    except UsageError as exc:
        report["error"] = str(exc)
        return EXIT_INPUT, report
    except (InputError, ValueError, KeyError, OSError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        return EXIT_INPUT, report
    return code, report


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] in ("-h", "--help"):
        build_parser().print_help()
        return EXIT_OK if argv else EXIT_INPUT
    code, report = run_command(argv)
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
        return code
    doc = report.pop("emit", report)
    out = _out_path(argv)
    if out:
        try:
            write_json(out, doc)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(dumps(doc))
    return code


def _out_path(argv: Sequence[str]) -> Optional[str]:
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--out="):
            return tok.split("=", 1)[1]
    return None


if __name__ == "__main__":
    sys.exit(main())
