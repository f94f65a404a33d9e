"""
Multivariable means
~~~~~~~~~~~~~~~~~~~
Arithmetic, harmonic and log-Euclidean means in closed form; Karcher,
generalized Karcher (``Lambda_g``), Lim-Palfia power and Wasserstein means by
fixed-point iteration with step damping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .means2 import G_LOG, ConsistencyError, RepFunction, geo_mean, geo_mean_t
from .pdcore import (
    as_spd,
    inv,
    logm,
    matrix_fn,
    normalize_weights,
    sqrt_and_invsqrt,
    sqrtm,
    sym,
    thompson,
)


@dataclass
class MeanProblem:
    """Weights ``omega`` and SPD matrices ``(A_1, ..., A_m)`` of one dimension."""

    weights: np.ndarray
    matrices: list

    def __post_init__(self):
        self.weights = normalize_weights(self.weights)
        mats = [as_spd(A, f"matrix {i}") for i, A in enumerate(self.matrices)]
        if len(mats) != self.weights.size:
            raise ValueError(f"{self.weights.size} weights for {len(mats)} matrices")
        if len({A.shape for A in mats}) != 1:
            raise ValueError("matrices must share one dimension")
        self.matrices = mats

    @classmethod
    def uniform(cls, matrices: Sequence) -> "MeanProblem":
        return cls(np.full(len(matrices), 1.0 / len(matrices)), list(matrices))

    @property
    def m(self) -> int:
        return len(self.matrices)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "MeanProblem":
        return MeanProblem(self.weights.copy(), [fn(A) for A in self.matrices])

    def inverted(self) -> "MeanProblem":
        return self.map(inv)

    def scaled(self, c: float) -> "MeanProblem":
        return self.map(lambda A: c * A)

    def powered(self, s: float) -> "MeanProblem":
        return self.map(lambda A: matrix_fn(A, lambda w: np.power(w, s)))

    def congruent(self, S: np.ndarray) -> "MeanProblem":
        return self.map(lambda A: sym(S @ A @ S.T))

    def permuted(self, perm: Sequence[int]) -> "MeanProblem":
        return MeanProblem(self.weights[list(perm)], [self.matrices[i] for i in perm])

    def bounds(self) -> tuple[float, float]:
        """``(alpha, beta)`` with ``alpha I <= A_i <= beta I`` for all ``i``."""
        ws = [np.linalg.eigvalsh(A) for A in self.matrices]
        return min(w[0] for w in ws), max(w[-1] for w in ws)


@dataclass
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 500
    damping: float = 1.0
    min_damping: float = 2.0**-20

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveOutcome:
    solution: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def elementary_mean(kind: str, P: MeanProblem) -> np.ndarray:
    """Closed-form means: ``arithmetic``, ``harmonic`` or ``log_euclidean``."""
    w, As = P.weights, P.matrices
    if kind == "arithmetic":
        return sym(sum(wi * A for wi, A in zip(w, As)))
    if kind == "harmonic":
        return inv(sym(sum(wi * inv(A) for wi, A in zip(w, As))))
    if kind in ("log_euclidean", "log-euclidean"):
        return matrix_fn(sym(sum(wi * logm(A) for wi, A in zip(w, As))), np.exp)
    raise ValueError(f"unknown elementary mean {kind!r}")


def arithmetic(P: MeanProblem) -> np.ndarray:
    return elementary_mean("arithmetic", P)


def harmonic(P: MeanProblem) -> np.ndarray:
    return elementary_mean("harmonic", P)


def log_euclidean(P: MeanProblem) -> np.ndarray:
    return elementary_mean("log_euclidean", P)


def _damped_solve(state0, residual_of, propose, opts: SolverOptions):
    """Shared damped iteration.

    ``state0`` is any value carrying the iterate; ``residual_of(state)``
    returns the scalar residual; ``propose(state, beta)`` returns a candidate
    state. A candidate is accepted only if it does not increase the residual;
    otherwise the step is halved. Accepted steps double it again up to
    ``opts.damping``.
    """
    state = state0
    r = residual_of(state)
    history = [r]
    beta = opts.damping
    it = 0
    while r > opts.tol and it < opts.max_iter:
        it += 1
        cand = propose(state, beta)
        rc = residual_of(cand) if cand is not None else math.inf
        if rc <= r:
            state, r = cand, rc
            history.append(r)
            beta = min(2.0 * beta, opts.damping)
        else:
            beta *= 0.5
            if beta < opts.min_damping:
                break
    return state, r, it, r <= opts.tol, history


def _gk_state(P: MeanProblem, g: RepFunction, X: np.ndarray):
    Xh, Xih = sqrt_and_invsqrt(X)
    S = sym(sum(wi * matrix_fn(sym(Xih @ A @ Xih), g.g) for wi, A in zip(P.weights, P.matrices)))
    return X, Xh, S, float(np.linalg.norm(S))


def generalized_karcher(
    P: MeanProblem,
    g: RepFunction = G_LOG,
    opts: Optional[SolverOptions] = None,
    x0: Optional[np.ndarray] = None,
) -> SolveOutcome:
    """Solve ``sum_i w_i g(X^{-1/2} A_i X^{-1/2}) = 0`` for ``X``.

    Iterates ``X <- X^{1/2} exp(beta * S(X)) X^{1/2}`` where ``S`` is the
    left-hand side, starting from the arithmetic mean unless ``x0`` is given.
    """
    opts = opts or SolverOptions()
    if g.g is None:
        raise ValueError(f"{g.name} has no generator g")
    X0 = arithmetic(P) if x0 is None else np.asarray(x0, dtype=float)

    def propose(state, beta):
        X, Xh, S, _ = state
        Xn = sym(Xh @ matrix_fn(beta * S, np.exp) @ Xh)
        try:
            return _gk_state(P, g, Xn)
        except (ValueError, FloatingPointError):
            return None

    with np.errstate(over="raise", invalid="raise", divide="raise"):
        state, r, it, ok, hist = _damped_solve(
            _gk_state(P, g, X0), lambda s: s[3], propose, opts)
    return SolveOutcome(state[0], r, it, ok, hist, {"generator": str(g)})


def karcher_mean(P: MeanProblem, opts: Optional[SolverOptions] = None,
                 x0: Optional[np.ndarray] = None) -> SolveOutcome:
    """Karcher mean: the solution of ``sum_i w_i log(X^{-1/2} A_i X^{-1/2}) = 0``."""
    return generalized_karcher(P, G_LOG, opts, x0)


def karcher_residual(P: MeanProblem, X: np.ndarray) -> float:
    return _gk_state(P, G_LOG, X)[3]


def power_mean(P: MeanProblem, t: float, opts: Optional[SolverOptions] = None) -> SolveOutcome:
    """Lim-Palfia power mean of order ``t`` in ``[-1, 1]``, ``|t| >= 1e-3``.

    For ``t > 0`` the fixed point of ``F(X) = sum_i w_i (X #_t A_i)``. Each step
    moves along the geodesic from ``X`` through ``F(X)`` with parameter
    ``beta / t``, which solves commuting instances in one step. The residual is
    ``d_T(X, F(X))``. Negative orders go through the inverses.
    """
    opts = opts or SolverOptions()
    if not -1 <= t <= 1 or abs(t) < 1e-3:
        raise ValueError("power mean order must satisfy 1e-3 <= |t| <= 1; use karcher_mean near 0")
    if t < 0:
        out = power_mean(P.inverted(), -t, opts)
        out.solution = inv(out.solution)
        return out

    def state_of(X):
        FX = sym(sum(wi * geo_mean_t(X, A, t) for wi, A in zip(P.weights, P.matrices)))
        return X, FX, thompson(X, FX)

    def propose(state, beta):
        X, FX, _ = state
        return state_of(geo_mean_t(X, FX, beta / t))

    state, r, it, ok, hist = _damped_solve(state_of(arithmetic(P)), lambda s: s[2], propose, opts)
    return SolveOutcome(state[0], r, it, ok, hist, {"t": t})


def wasserstein_K(P: MeanProblem, X: np.ndarray) -> np.ndarray:
    """``K(X) = X^{-1/2} [sum_i w_i (X^{1/2} A_i X^{1/2})^{1/2}]^2 X^{-1/2}``."""
    Xh, Xih = sqrt_and_invsqrt(X)
    M = sym(sum(wi * sqrtm(sym(Xh @ A @ Xh)) for wi, A in zip(P.weights, P.matrices)))
    return sym(Xih @ M @ M @ Xih)


def wasserstein_equation_residual(P: MeanProblem, X: np.ndarray) -> float:
    """Frobenius norm of ``sum_i w_i A_i # X^{-1} - I``."""
    Xi = inv(X)
    R = sum(wi * geo_mean(Xi, A) for wi, A in zip(P.weights, P.matrices)) - np.eye(P.n)
    return float(np.linalg.norm(R))


def wasserstein_mean(P: MeanProblem, opts: Optional[SolverOptions] = None,
                     x0: Optional[np.ndarray] = None, trace_tol: float = 1e-10) -> SolveOutcome:
    """Wasserstein barycenter by the iteration ``X_{k+1} = K(X_k)``.

    Stops when ``d_T(X_k, X_{k+1}) <= tol``. The trace of every iterate is
    recorded in ``info["traces"]``; from ``X_1`` on the traces must be
    nondecreasing (relative slack ``trace_tol``), else
    :class:`ConsistencyError` is raised. The starting point is exempt: it need
    not lie in the image of ``K``.
    """
    opts = opts or SolverOptions()
    X = arithmetic(P) if x0 is None else np.asarray(x0, dtype=float)
    traces = [float(np.trace(X))]
    history = []
    converged = False
    it = 0
    d = math.inf
    while it < opts.max_iter:
        it += 1
        Xn = wasserstein_K(P, X)
        traces.append(float(np.trace(Xn)))
        if it >= 2 and traces[-1] < traces[-2] - trace_tol * max(1.0, abs(traces[-2])):
            raise ConsistencyError(
                f"trace decreased at step {it}: {traces[-2]!r} -> {traces[-1]!r}")
        d = thompson(X, Xn)
        history.append(d)
        X = Xn
        if d <= opts.tol:
            converged = True
            break
    info = {"traces": traces, "equation_residual": wasserstein_equation_residual(P, X)}
    return SolveOutcome(X, d, it, converged, history, info)
