"""
Random instances and property suites
~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
Every suite checks one stated inequality or identity on seeded random
instances. A check returns a margin that is nonnegative when the property
holds at the requested tolerance; failures are recorded with everything
needed to replay them and never stop the run.

Random generation uses numpy's ``PCG64`` bit generator through
``default_rng``. Trial ``k`` of a run seeded with ``s`` draws from
``default_rng([s, k])``, so any trial can be replayed on its own.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .means2 import (
    G_LOG,
    geo_mean_t,
    spectral_mean_t,
    wasserstein2_t,
)
from .meansm import (
    MeanProblem,
    SolverOptions,
    arithmetic,
    harmonic,
    karcher_mean,
    log_euclidean,
    power_mean,
    wasserstein_mean,
)
from .pdcore import (
    compound,
    distance,
    expm,
    inv,
    logm,
    order_check,
    powm,
    sym,
    thompson,
)
from .speqsolve import flow_derivative_check, random_start, residual, solve_equation

DIMS = (2, 3, 5)
COUNTS = (2, 3, 4)
COND_RANGE = (2.0, 100.0)
COND_CAP = 1e6
T_GRID = tuple(k / 10 for k in range(1, 10))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def random_spd(n: int, cond: float = 10.0, seed=0) -> np.ndarray:
    """``Q diag(lambda) Q^T`` with ``lambda`` log-uniform in ``[cond^{-1/2}, cond^{1/2}]``.

    ``Q`` is the orthogonal factor of a Gaussian matrix with the diagonal of
    ``R`` made positive. ``seed`` is an integer or a ``Generator``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not cond >= 1:
        raise ValueError("cond must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Q = random_orthogonal(rng, n)
    half = 0.5 * math.log(cond)
    lam = np.exp(rng.uniform(-half, half, n))
    return sym((Q * lam) @ Q.T)


def random_weights(rng: np.random.Generator, m: int) -> np.ndarray:
    w = rng.uniform(0.2, 1.0, m)
    return w / w.sum()


def random_problem(rng: np.random.Generator, n: int, m: int,
                   cond_range: tuple = COND_RANGE) -> MeanProblem:
    lo, hi = (math.log(min(c, COND_CAP)) for c in cond_range)
    mats = [random_spd(n, math.exp(rng.uniform(lo, hi)), rng) for _ in range(m)]
    return MeanProblem(random_weights(rng, m), mats)


def shape_for(trial: int) -> tuple[int, int]:
    """``(n, m)`` cycling through ``DIMS x COUNTS`` by trial index."""
    return DIMS[trial % len(DIMS)], COUNTS[(trial // len(DIMS)) % len(COUNTS)]


@dataclass
class Failure:
    trial: int
    seed: int
    margin: float
    message: str
    instance: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    suite: str
    citation: str
    trials: int
    seed: int
    tol: float
    passes: int = 0
    failures: list = field(default_factory=list)
    min_margin: float = math.inf
    wall_time: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passes == self.trials

    def summary(self) -> str:
        return (f"{self.suite}: {self.passes}/{self.trials} passed, "
                f"min margin {self.min_margin:.3e} ({self.citation})")


def _instance_dict(P: MeanProblem) -> dict:
    return {"weights": P.weights.tolist(), "matrices": [A.tolist() for A in P.matrices]}


class _Ctx:
    """Per-trial state: the generator, tolerance, solver options and notes."""

    def __init__(self, rng, tol, opts, notes):
        self.rng = rng
        self.tol = tol
        self.opts = opts
        self.notes = notes
        self.problem: Optional[MeanProblem] = None

    def count(self, key: str) -> None:
        self.notes[key] = self.notes.get(key, 0) + 1


def _solve_S(P: MeanProblem, opts: SolverOptions, x0=None) -> np.ndarray:
    out = solve_equation(P, G_LOG, x0, opts)
    if not out.converged:
        raise RuntimeError(f"spectral equation did not converge (residual {out.residual:.3e})")
    return out.solution


def _solved(out, what: str) -> np.ndarray:
    if not out.converged:
        raise RuntimeError(f"{what} did not converge (residual {out.residual:.3e})")
    return out.solution


def _close(X: np.ndarray, Y: np.ndarray, tol: float) -> float:
    """Margin of ``||X - Y||_F <= tol * max(1, ||Y||_F)``."""
    return tol * max(1.0, float(np.linalg.norm(Y))) - float(np.linalg.norm(X - Y))


def _rel(a: float, b: float, tol: float) -> float:
    return tol * max(abs(b), np.finfo(float).tiny) - abs(a - b)


# -- suites ---------------------------------------------------------------

def _two_var_chain(c: _Ctx, n: int, m: int) -> float:
    A = random_spd(n, c.rng.uniform(2, 100), c.rng)
    B = random_spd(n, c.rng.uniform(2, 100), c.rng)
    c.problem = MeanProblem.uniform([A, B])
    LA, LB = logm(A), logm(B)
    margins = []
    for t in T_GRID:
        G = geo_mean_t(A, B, t)
        E = expm(sym((1 - t) * LA + t * LB))
        Sp = spectral_mean_t(A, B, t)
        W = wasserstein2_t(A, B, t)
        margins += [order_check("log_major", G, E, c.tol).margin,
                    order_check("log_major", E, Sp, c.tol).margin,
                    order_check("near", Sp, W, c.tol).margin]
    return min(margins)


def _multi_chain(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    L = _solved(karcher_mean(P, c.opts), "Karcher mean")
    W = _solved(wasserstein_mean(P, c.opts), "Wasserstein mean")
    LE = log_euclidean(P)
    return min(order_check("loewner", harmonic(P), L, c.tol).margin,
               order_check("log_major", L, LE, c.tol).margin,
               order_check("weak_log_major", LE, W, c.tol).margin,
               order_check("loewner", W, arithmetic(P), c.tol).margin)


def _karcher_props(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    w = P.weights
    L = _solved(karcher_mean(P, c.opts), "Karcher mean")
    out = []
    # (P2) joint homogeneity
    a = np.exp(c.rng.uniform(-1, 1, m))
    La = _solved(karcher_mean(MeanProblem(w, [ai * A for ai, A in zip(a, P.matrices)]), c.opts), "P2")
    out.append(_close(La, float(np.prod(a**w)) * L, c.tol))
    # (P3) permutation invariance
    perm = c.rng.permutation(m)
    out.append(_close(_solved(karcher_mean(P.permuted(perm), c.opts), "P3"), L, c.tol))
    # (P6) congruence invariance
    S = c.rng.standard_normal((n, n)) + n * np.eye(n)
    LS = _solved(karcher_mean(P.congruent(S), c.opts), "P6")
    out.append(_close(LS, sym(S @ L @ S.T), c.tol))
    # (P8) self-duality
    Li = _solved(karcher_mean(P.inverted(), c.opts), "P8")
    out.append(_close(Li, inv(L), c.tol))
    # (P9) determinant identity
    detp = float(np.prod([np.linalg.det(A) ** wi for wi, A in zip(w, P.matrices)]))
    out.append(_rel(float(np.linalg.det(L)), detp, c.tol))
    # (P10) H <= Lambda <= A
    out.append(order_check("loewner", harmonic(P), L, c.tol).margin)
    out.append(order_check("loewner", L, arithmetic(P), c.tol).margin)
    # (P4) monotonicity on constructed pairs A_i <= B_i
    Bs = [A + sym(G @ G.T) for A, G in
          ((A, 0.3 * c.rng.standard_normal((n, n))) for A in P.matrices)]
    LB = _solved(karcher_mean(MeanProblem(w, Bs), c.opts), "P4")
    out.append(order_check("loewner", L, LB, c.tol).margin)
    # (P5) Thompson contraction
    rhs = sum(wi * thompson(A, B) for wi, A, B in zip(w, P.matrices, Bs))
    out.append(rhs + c.tol - thompson(L, LB))
    return min(out)


def _gamma_props(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    w = P.weights
    X = _solve_S(P, c.opts)
    out = []
    # (2) homogeneity
    alpha = math.exp(c.rng.uniform(-2, 2))
    out.append(_close(_solve_S(P.scaled(alpha), c.opts, alpha * X), alpha * X, c.tol))
    # (3) permutation invariance
    out.append(_close(_solve_S(P.permuted(c.rng.permutation(m)), c.opts, X), X, c.tol))
    # (5) orthogonal congruence
    U = random_orthogonal(c.rng, n)
    UX = sym(U @ X @ U.T)
    out.append(_close(_solve_S(P.congruent(U), c.opts, UX), UX, c.tol))
    # (6) inversion
    Xi = inv(X)
    out.append(_close(_solve_S(P.inverted(), c.opts, Xi), Xi, c.tol))
    # (7) determinant identity
    detp = float(np.prod([np.linalg.det(A) ** wi for wi, A in zip(w, P.matrices)]))
    out.append(_rel(float(np.linalg.det(X)), detp, c.tol))
    # compound k = 2 solves the compound problem
    if 2 <= n <= 4:
        Pk = MeanProblem(w, [compound(A, 2) for A in P.matrices])
        out.append(1e-8 - residual(Pk, compound(X, 2))[1])
    # commuting data: the product of powers solves the equation
    D = [np.diag(np.exp(c.rng.uniform(-2, 2, n))) for _ in range(m)]
    Pd = MeanProblem(w, D)
    Xd = np.diag(np.prod([np.diag(Di) ** wi for wi, Di in zip(w, D)], axis=0))
    out.append(c.opts.tol - residual(Pd, Xd)[1])
    return min(out)


def _gamma_bounds(c: _Ctx, n: int, m: int, trial: int) -> float:
    P = random_problem(c.rng, n, m)
    if trial % 2 == 1:
        # rescale so that 2I - sum w_i A_i is positive definite
        lam = float(np.linalg.eigvalsh(arithmetic(P))[-1])
        P = P.scaled(c.rng.uniform(0.5, 1.9) / lam)
    c.problem = P
    X = _solve_S(P, c.opts)
    I = np.eye(n)
    lower = sym(2 * I - sum(wi * inv(A) for wi, A in zip(P.weights, P.matrices)))
    out = [order_check("loewner", lower, X, c.tol).margin]
    M = sym(2 * I - arithmetic(P))
    if np.linalg.eigvalsh(M)[0] > 0:
        c.count("upper_bound_checked")
        out.append(order_check("loewner", X, inv(M), c.tol).margin)
    else:
        c.count("upper_bound_not_applicable")
    return min(out)


def _near_sandwich(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    X = _solve_S(P, c.opts)
    return min(order_check("near", harmonic(P), X, c.tol).margin,
               order_check("near", X, arithmetic(P), c.tol).margin)


def _le_major(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    X = _solve_S(P, c.opts)
    return order_check("log_major", log_euclidean(P), X, c.tol).margin


def _trace_prop(c: _Ctx, n: int, m: int) -> float:
    P = random_problem(c.rng, n, m)
    X = _solve_S(P, c.opts)
    k = 1.0 / float(np.linalg.eigvalsh(X)[-1])
    P = c.problem = P.scaled(k)
    Xs = _solve_S(P, c.opts, k * X)
    W = _solved(wasserstein_mean(P, c.opts), "Wasserstein mean")
    X3 = Xs @ Xs @ Xs
    return float(np.trace(W)) + c.tol - float(np.trace(X3))


def _power_cmp(c: _Ctx, n: int, m: int) -> float:
    P = random_problem(c.rng, n, m)
    X = _solve_S(P, c.opts)
    k = 1.0 / float(np.linalg.eigvalsh(X)[0])
    P = c.problem = P.scaled(k)
    Xi = inv(_solve_S(P, c.opts, k * X))
    out = []
    for t in (0.5, 0.75, 1.0):
        Pt = _solved(power_mean(P, t, c.opts), f"power mean t={t}")
        out.append(float(np.linalg.eigvalsh(sym(Pt - Xi))[0]) + c.tol)
    return min(out)


def lie_trotter_errors(P: MeanProblem, opts: SolverOptions, ks=range(1, 9)) -> dict:
    """Frobenius distances of ``M(A^s)^{1/s}`` to the log-Euclidean mean, ``s = 2^-k``.

    Raising to ``1/s`` multiplies solver error by ``1/s``, so each mean is
    solved to ``s * opts.tol``, floored at ``1e-14`` where residuals bottom out.
    """
    LE = log_euclidean(P)
    errs: dict = {"karcher": [], "wasserstein": [], "spectral": []}
    X = None
    for k in ks:
        s = 2.0**-k
        Ps = P.powered(s)
        o = replace(opts, tol=max(opts.tol * s, 1e-14))
        Lk = _solved(karcher_mean(Ps, o), "Karcher mean")
        Wk = _solved(wasserstein_mean(Ps, o), "Wasserstein mean")
        X = _solve_S(Ps, o, None if X is None else powm(X, 0.5))
        for key, M in (("karcher", Lk), ("wasserstein", Wk), ("spectral", X)):
            errs[key].append(float(np.linalg.norm(powm(M, 1.0 / s) - LE)))
    return errs


def strictly_decreasing_margin(seq) -> float:
    """Smallest relative drop ``(a_k - a_{k+1}) / a_k``; positive iff strictly decreasing."""
    return min((a - b) / a for a, b in zip(seq, seq[1:]))


def _lie_trotter(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m, (2.0, 20.0))
    errs = lie_trotter_errors(P, c.opts)
    return min(strictly_decreasing_margin(v) for v in errs.values())


def _geodesic_ds(c: _Ctx, n: int, m: int) -> float:
    A = random_spd(n, c.rng.uniform(2, 100), c.rng)
    B = random_spd(n, c.rng.uniform(2, 100), c.rng)
    c.problem = MeanProblem.uniform([A, B])
    d = distance("spectral_semi", A, B)
    out = []
    for s, t in c.rng.uniform(0, 1, (4, 2)):
        lhs = distance("spectral_semi", spectral_mean_t(A, B, s), spectral_mean_t(A, B, t))
        out.append(c.tol - abs(lhs - abs(s - t) * d))
    return min(out)


def _wass_trace(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    out = wasserstein_mean(P, c.opts, trace_tol=c.tol)
    _solved(out, "Wasserstein mean")
    tr = out.info["traces"]
    final = tr[-1]
    # the arithmetic-mean start is exempt: it need not lie in the image of K
    margins = [b - a + c.tol for a, b in zip(tr[1:], tr[2:])]
    margins += [final + c.tol - x for x in tr[1:]]
    margins.append(10 * c.opts.tol - out.info["equation_residual"])
    return min(margins)


def _flow_deriv(c: _Ctx, n: int, m: int) -> float:
    P = c.problem = random_problem(c.rng, n, m)
    lo, hi = P.bounds()
    X = random_start(c.rng, n, lo, hi)
    D = flow_derivative_check(P, X, 1e-5)
    return 1e-6 - float(np.linalg.norm(D + 0.5 * np.eye(n)))


SUITES: dict[str, tuple[Callable, str]] = {
    "two-var-chain": (_two_var_chain,
                      "A #_t B <_log exp((1-t) log A + t log B) <_log A natural_t B, "
                      "and A natural_t B below A diamond_t B in the near order"),
    "multi-chain": (_multi_chain, "H <= Lambda <_log LE <_wlog Omega <= A"),
    "karcher-props": (_karcher_props,
                      "Karcher mean: homogeneity, permutation, congruence, self-duality, "
                      "determinant, AGH sandwich, monotonicity, Thompson contraction"),
    "gamma-props": (_gamma_props,
                    "solution set of Phi = 0: homogeneity, permutation, unitary congruence, "
                    "inversion, determinant, compound membership, commuting case"),
    "gamma-bounds": (_gamma_bounds,
                     "2I - sum w_i A_i^-1 <= S <= (2I - sum w_i A_i)^-1 when the latter is PD"),
    "near-sandwich": (_near_sandwich, "H <= S <= A in the near order"),
    "le-major": (_le_major, "LE <_log S"),
    "trace-prop": (_trace_prop, "S <= I implies tr S^3 <= tr Omega"),
    "power-cmp": (_power_cmp, "S >= I implies S^-1 <= P_t, t in {1/2, 3/4, 1}"),
    "lie-trotter": (_lie_trotter, "M(A^s)^(1/s) -> LE as s -> 0 for Lambda, Omega, S"),
    "geodesic-ds": (_geodesic_ds, "d_S(A natural_s B, A natural_t B) = |s - t| d_S(A, B)"),
    "wass-trace": (_wass_trace, "tr X_k <= tr X_(k+1) <= tr Omega along X_(k+1) = K(X_k)"),
    "flow-deriv": (_flow_deriv, "DF(X)[X] = -I/2"),
}

_NEEDS_TRIAL = {"gamma-bounds"}


def run_trial(suite: str, seed: int, trial: int, tol: float,
              opts: Optional[SolverOptions] = None, notes: Optional[dict] = None):
    """Run one trial; returns ``(margin, problem)``. Exceptions propagate."""
    fn, _ = SUITES[suite]
    c = _Ctx(trial_rng(seed, trial), tol, opts or SolverOptions(), {} if notes is None else notes)
    n, m = shape_for(trial)
    margin = fn(c, n, m, trial) if suite in _NEEDS_TRIAL else fn(c, n, m)
    return float(margin), c.problem


def run_suite(suite: str, trials: int, seed: int, opts: Optional[SolverOptions] = None,
              tol: float = 1e-9) -> SuiteReport:
    """Run ``trials`` seeded trials of a catalog suite."""
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; known: {', '.join(SUITES)}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rep = SuiteReport(suite, SUITES[suite][1], trials, seed, tol)
    t0 = time.perf_counter()
    for k in range(trials):
        problem = None
        try:
            margin, problem = run_trial(suite, seed, k, tol, opts, rep.notes)
            msg = "" if margin >= 0 else "property violated beyond tolerance"
        except Exception as exc:  # recorded, never fatal
            margin, msg = -math.inf, f"{type(exc).__name__}: {exc}"
        rep.min_margin = min(rep.min_margin, margin)
        if margin >= 0:
            rep.passes += 1
        else:
            inst = _instance_dict(problem) if problem is not None else {}
            rep.failures.append(Failure(k, seed, margin, msg, inst))
    rep.wall_time = time.perf_counter() - t0
    return rep


# -- conjecture explorers ---------------------------------------------------

CONJECTURES = {
    "s-wlog-omega": "S <_wlog Omega (open)",
    "p-power-sp": "S(A^p)^(1/p) <_log S(A), 0 < p < 1 (open for m > 2)",
}


def log_prefix_slack(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``sum_{j<=k} log lambda_j(B) - sum_{j<=k} log lambda_j(A)`` for every ``k``."""
    la = np.cumsum(np.log(np.sort(np.linalg.eigvalsh(A))[::-1]))
    lb = np.cumsum(np.log(np.sort(np.linalg.eigvalsh(B))[::-1]))
    return lb - la


@dataclass
class ConjectureReport:
    conjecture: str
    statement: str
    trials: int
    seed: int
    tol: float
    violations: int = 0
    skipped: int = 0
    min_slack: float = math.inf
    mean_min_slack: float = math.nan
    extremal: dict = field(default_factory=dict)
    wall_time: float = 0.0
    label: str = "evidence only; no claim about the truth of the statement"


def conjecture_explore(conjecture: str, trials: int, seed: int, m: Optional[int] = None,
                       opts: Optional[SolverOptions] = None, tol: float = 1e-9) -> ConjectureReport:
    """Search random instances for violations of an open log-majorization statement.

    The slack of a trial is the smallest log-prefix difference over all ``k``
    (for the full log-majorization the determinant gap is included). A trial
    with slack below ``-tol`` counts as a violation.
    """
    if conjecture not in CONJECTURES:
        raise KeyError(f"unknown conjecture {conjecture!r}; known: {', '.join(CONJECTURES)}")
    opts = opts or SolverOptions()
    rep = ConjectureReport(conjecture, CONJECTURES[conjecture], trials, seed, tol)
    slacks = []
    t0 = time.perf_counter()
    for k in range(trials):
        rng = trial_rng(seed, k)
        n, mm = shape_for(k)
        if m is not None:
            mm = m
        P = random_problem(rng, n, mm)
        extra = {}
        try:
            X = _solve_S(P, opts)
            if conjecture == "s-wlog-omega":
                W = _solved(wasserstein_mean(P, opts), "Wasserstein mean")
                s = float(np.min(log_prefix_slack(X, W)))
            else:
                p = float(rng.uniform(0.05, 0.95))
                Xp = _solve_S(P.powered(p), opts, powm(X, p))
                sl = log_prefix_slack(powm(Xp, 1.0 / p), X)
                # the determinant gap must vanish, so it enters with either sign
                s = float(min(np.min(sl[:-1], initial=math.inf), -abs(sl[-1])))
                extra = {"p": p}
        except RuntimeError:
            rep.skipped += 1
            continue
        slacks.append(s)
        if s < -tol:
            rep.violations += 1
        if s < rep.min_slack:
            rep.min_slack = s
            rep.extremal = {"trial": k, "slack": s, **extra, **_instance_dict(P)}
    rep.mean_min_slack = float(np.mean(slacks)) if slacks else math.nan
    rep.wall_time = time.perf_counter() - t0
    return rep
