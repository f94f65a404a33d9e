"""
Solving ``Phi_g(X) = sum_i w_i g(A_i # X^{-1}) = 0``
~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
With ``g = log`` this is the multivariable spectral mean equation; with
``g(x) = x - 1`` its unique solution is the Wasserstein mean. The solution
set need not be a single point, so besides a single-start solver there is a
multistart explorer that clusters the converged solutions.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .means2 import G_LOG, ConsistencyError, RepFunction, geo_mean_t
from .meansm import (
    MeanProblem,
    SolveOutcome,
    SolverOptions,
    _damped_solve,
    generalized_karcher,
    karcher_mean,
)
from .pdcore import inv, matrix_fn, sqrt_and_invsqrt, sqrtm, sym, thompson

CLUSTER_RADIUS = 1e-4


class DivergenceError(RuntimeError):
    """An accepted iterate left the Loewner box ``[alpha/2 I, 2 beta I]``."""


class ConvergenceError(RuntimeError):
    """An inner solve did not converge."""


def _phi_parts(P: MeanProblem, X: np.ndarray, g: RepFunction):
    Xh, Xih = sqrt_and_invsqrt(X)
    # A # X^{-1} = X^{-1/2} (X^{1/2} A X^{1/2})^{1/2} X^{-1/2}
    Cs = [sqrtm(sym(Xh @ A @ Xh)) for A in P.matrices]
    R = sym(sum(wi * matrix_fn(sym(Xih @ C @ Xih), g.g) for wi, C in zip(P.weights, Cs)))
    return Xh, Cs, R


def _g_two_sided(G: np.ndarray, H: np.ndarray, g) -> np.ndarray:
    # g(G) given G and H = G^{-1} computed independently. Eigenvalues below 1
    # come from Rayleigh quotients of H, which keeps them relatively accurate
    # when G is ill-conditioned.
    _, Q = np.linalg.eigh(G)
    lam = np.empty(Q.shape[1])
    for k, q in enumerate(Q.T):
        rg = q @ G @ q
        lam[k] = rg if rg >= 1.0 else 1.0 / (q @ H @ q)
    return sym((Q * g(lam)) @ Q.T)


def residual_matrix(P: MeanProblem, X: np.ndarray, g: RepFunction = G_LOG,
                    accurate: Optional[bool] = None) -> np.ndarray:
    """``sum_i w_i g(A_i # X^{-1})`` as a symmetric matrix.

    With ``accurate=True`` each ``A_i # X^{-1}`` is paired with its inverse
    ``A_i^{-1} # X`` so that small eigenvalues keep relative accuracy; this
    doubles the cost and matters only for badly conditioned data. By default
    it is used when :func:`needs_accurate` says so.
    """
    X = np.asarray(X, dtype=float)
    if accurate is None:
        accurate = needs_accurate(P)
    if not accurate:
        return _phi_parts(P, X, g)[2]
    Xh, Xih = sqrt_and_invsqrt(X)
    R = np.zeros_like(X)
    for wi, A in zip(P.weights, P.matrices):
        G = sym(Xih @ sqrtm(sym(Xh @ A @ Xh)) @ Xih)
        H = geo_mean_t(X, inv(A), 0.5)
        R += wi * _g_two_sided(G, H, g.g)
    return sym(R)


def residual(P: MeanProblem, X: np.ndarray, g: RepFunction = G_LOG,
             accurate: Optional[bool] = None) -> tuple[np.ndarray, float]:
    """Residual matrix of ``Phi_g`` at ``X`` and its Frobenius norm."""
    R = residual_matrix(P, X, g, accurate)
    return R, float(np.linalg.norm(R))


def psi_residual(P: MeanProblem, X: np.ndarray, opts: Optional[SolverOptions] = None) -> np.ndarray:
    """``Lambda(omega; A_1 # X^{-1}, ..., A_m # X^{-1}) - I`` through a Karcher solve."""
    opts = opts or SolverOptions()
    X = np.asarray(X, dtype=float)
    Xh, Xih = sqrt_and_invsqrt(X)
    Gs = [sym(Xih @ sqrtm(sym(Xh @ A @ Xh)) @ Xih) for A in P.matrices]
    out = karcher_mean(MeanProblem(P.weights, Gs), opts)
    if not out.converged:
        raise ConvergenceError(f"inner Karcher solve stalled at residual {out.residual:.3e}")
    return out.solution - np.eye(P.n)


def _box_check(X: np.ndarray, lo: float, hi: float) -> None:
    w = np.linalg.eigvalsh(X)
    if w[0] < 0.5 * lo or w[-1] > 2.0 * hi:
        raise DivergenceError(
            f"iterate spectrum [{w[0]:.4g}, {w[-1]:.4g}] left [{0.5 * lo:.4g}, {2 * hi:.4g}]")


def _sym_basis(n: int) -> list:
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            basis.append(E)
    return basis


def _coords(M: np.ndarray, basis: list) -> np.ndarray:
    return np.array([np.sum(M * E) for E in basis])


def solve_equation(
    P: MeanProblem,
    g: RepFunction = G_LOG,
    X0: Optional[np.ndarray] = None,
    opts: Optional[SolverOptions] = None,
    method: str = "fixed_point",
    accurate: Optional[bool] = None,
) -> SolveOutcome:
    """Find one solution of ``Phi_g(X) = 0`` starting from ``X0``.

    ``method="fixed_point"`` iterates the map
    ``T(X) = Lambda_g(omega; (X^{1/2} A_i X^{1/2})^{1/2})`` whose fixed points
    are the solutions. Since ``T`` scales like ``X^{1/2}``, the step
    ``X <- X #_{2 beta} T(X)`` (geodesic extrapolation) is exact for
    commuting data; ``beta`` is halved whenever the residual would grow.
    The inner ``Lambda_g`` solve is warm-started at ``X`` with tolerance
    ``tol / 100``.

    ``method="newton"`` runs damped Newton on the residual in the chart
    ``H -> X^{1/2} exp(H) X^{1/2}`` with a finite-difference Jacobian. It can
    reach solutions that repel the fixed-point map.

    ``accurate`` selects the paired evaluation of the residual (see
    :func:`residual_matrix`); by default it is used when some ``A_i`` has
    condition number above ``1e6``, where the plain route loses digits.

    Raises :class:`DivergenceError` if an accepted iterate leaves
    ``[alpha/2 I, 2 beta I]``; a converged solution outside ``[alpha I, beta I]``
    (beyond rounding) raises :class:`ConsistencyError`.
    """
    opts = opts or SolverOptions()
    lo, hi = P.bounds()
    X = np.eye(P.n) * math.sqrt(lo * hi) if X0 is None else np.asarray(X0, dtype=float)
    if accurate is None:
        accurate = needs_accurate(P)
    if method == "fixed_point":
        out = _solve_fixed_point(P, g, X, opts, lo, hi, accurate)
    elif method == "newton":
        out = _solve_newton(P, g, X, opts, lo, hi, accurate)
    else:
        raise ValueError(f"unknown method {method!r}")
    if out.converged:
        w = np.linalg.eigvalsh(out.solution)
        slack = 1e-9
        if w[0] < lo * (1 - slack) or w[-1] > hi * (1 + slack):
            raise ConsistencyError(
                f"solution spectrum [{w[0]!r}, {w[-1]!r}] outside [{lo!r}, {hi!r}]")
    out.info.update(method=method, generator=str(g))
    return out


def needs_accurate(P: MeanProblem, cond_limit: float = 1e6) -> bool:
    return max(np.linalg.cond(A) for A in P.matrices) > cond_limit


def _solve_fixed_point(P, g, X, opts, lo, hi, accurate=False) -> SolveOutcome:
    inner = SolverOptions(tol=opts.tol / 100, max_iter=opts.max_iter,
                          min_damping=2.0**-8)
    stats = {"inner_iterations": 0, "inner_stalls": 0}

    def state_of(X):
        Xh, Cs, R = _phi_parts(P, X, g)
        if accurate:
            R = residual_matrix(P, X, g, True)
        return X, Cs, float(np.linalg.norm(R))

    def propose(state, beta):
        X, Cs, _ = state
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                T = generalized_karcher(MeanProblem(P.weights, Cs), g, inner, x0=X)
                stats["inner_iterations"] += T.iterations
                stats["inner_stalls"] += not T.converged
                cand = state_of(geo_mean_t(X, T.solution, 2.0 * beta))
        except (ValueError, FloatingPointError):
            return None
        if cand[2] <= state[2]:
            _box_check(cand[0], lo, hi)
        return cand

    _box_check(X, lo, hi)
    state, r, it, ok, hist = _damped_solve(state_of(X), lambda s: s[2], propose, opts)
    return SolveOutcome(state[0], r, it, ok, hist, stats)


def _solve_newton(P, g, X, opts, lo, hi, accurate=False, fd_step: float = 1e-6) -> SolveOutcome:
    basis = _sym_basis(P.n)

    def resid(X):
        return residual_matrix(P, X, g, accurate)

    R = resid(X)
    r = float(np.linalg.norm(R))
    history = [r]
    it = 0
    while r > opts.tol and it < opts.max_iter:
        it += 1
        Xh = sqrtm(X)

        def chart(H):
            return sym(Xh @ matrix_fn(H, np.exp) @ Xh)

        J = np.column_stack([
            (_coords(resid(chart(fd_step * E)), basis)
             - _coords(resid(chart(-fd_step * E)), basis)) / (2 * fd_step)
            for E in basis
        ])
        d = np.linalg.lstsq(J, -_coords(R, basis), rcond=None)[0]
        H = sum(di * E for di, E in zip(d, basis))
        size = float(np.max(np.abs(np.linalg.eigvalsh(H))))
        lam = min(opts.damping, 1.0 / size) if size > 0 else opts.damping
        accepted = False
        while lam >= opts.min_damping:
            try:
                with np.errstate(over="raise", invalid="raise", divide="raise"):
                    Xn = chart(lam * H)
                    Rn = resid(Xn)
                rn = float(np.linalg.norm(Rn))
            except (ValueError, FloatingPointError):
                rn = math.inf
            if rn < r * (1.0 - 1e-4 * lam):
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        _box_check(Xn, lo, hi)
        X, R, r = Xn, Rn, rn
        history.append(r)
    return SolveOutcome(X, r, it, r <= opts.tol, history, {})


@dataclass
class Cluster:
    representative: np.ndarray
    count: int
    spread: float
    residual: float
    methods: list = field(default_factory=list)
    first_start: int = 0


@dataclass
class SolutionSet:
    clusters: list
    starts: int
    failures: int
    attempts: int
    radius: float = CLUSTER_RADIUS

    def __len__(self) -> int:
        return len(self.clusters)


def random_start(rng: np.random.Generator, n: int, lo: float, hi: float) -> np.ndarray:
    """``Q diag(lambda) Q^T`` with log-uniform ``lambda`` in ``[lo, hi]``.

    ``Q`` comes from the QR factorization of a standard Gaussian matrix with
    the diagonal of ``R`` made positive.
    """
    G = rng.standard_normal((n, n))
    Q, Rf = np.linalg.qr(G)
    Q = Q * np.where(np.diag(Rf) < 0, -1.0, 1.0)
    lam = np.exp(rng.uniform(math.log(lo), math.log(hi), n))
    return sym((Q * lam) @ Q.T)


def explore_solutions(
    P: MeanProblem,
    g: RepFunction = G_LOG,
    n_starts: int = 64,
    seed: int = 0,
    opts: Optional[SolverOptions] = None,
    methods: Sequence[str] = ("fixed_point", "newton"),
    threads: int = 1,
    radius: float = CLUSTER_RADIUS,
) -> SolutionSet:
    """Multistart search of the solution set of ``Phi_g(X) = 0``.

    Starts are drawn from the Loewner interval ``[alpha I, beta I]`` that holds
    every solution; each start is run with every method in ``methods``.
    Converged solutions are merged greedily in start order into clusters of
    Thompson radius ``radius``, so the result does not depend on ``threads``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    opts = opts or SolverOptions()
    lo, hi = P.bounds()
    rng = np.random.default_rng(seed)
    starts = [random_start(rng, P.n, lo, hi) for _ in range(n_starts)]
    jobs = [(k, X0, meth) for k, X0 in enumerate(starts) for meth in methods]

    def run(job):
        k, X0, meth = job
        try:
            out = solve_equation(P, g, X0, opts, method=meth)
        except (DivergenceError, ConsistencyError, ValueError, FloatingPointError):
            return None
        return out if out.converged else None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    clusters: list[Cluster] = []
    failures = 0
    for (k, _, meth), out in zip(jobs, results):
        if out is None:
            failures += 1
            continue
        X = out.solution
        for c in clusters:
            d = thompson(c.representative, X)
            if d <= radius:
                c.count += 1
                c.spread = max(c.spread, d)
                if meth not in c.methods:
                    c.methods.append(meth)
                break
        else:
            clusters.append(Cluster(X, 1, 0.0, out.residual, [meth], k))
    return SolutionSet(clusters, n_starts, failures, len(jobs), radius)


def flow_derivative_check(P: MeanProblem, X: np.ndarray, h: float = 1e-5,
                          g: RepFunction = G_LOG, accurate: Optional[bool] = None) -> np.ndarray:
    """Central difference of ``F(X) = X^{-1/2} Psi(X) X^{-1/2}`` along ``X``.

    ``Psi(X) = X^{1/2} Phi(X) X^{1/2}`` is the vector field whose zeros are
    the solutions, so ``F = Phi`` and the difference is
    ``(Phi((1+h) X) - Phi((1-h) X)) / (2h)``. For ``g = log`` this is
    ``-1/2 I`` up to ``O(h^2)``. ``accurate`` is chosen as in
    :func:`solve_equation`.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("step h must lie in [1e-6, 1e-3]")
    X = np.asarray(X, dtype=float)
    hi = residual_matrix(P, (1 + h) * X, g, accurate)
    lo = residual_matrix(P, (1 - h) * X, g, accurate)
    return (hi - lo) / (2 * h)
