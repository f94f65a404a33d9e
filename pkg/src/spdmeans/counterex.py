"""
Two-by-two instance with more than one spectral mean solution
~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
Three determinant-one matrices ``A_i = B_i X_0 B_i`` with
``X_0 = exp(3S)`` and ``B_i = exp(Z_i)``, ``Z_1 = 3S``, ``Z_2 = cT``,
``Z_3 = -Z_1 - Z_2`` (``c = 19/10``; ``S``, ``T`` the traceless Pauli-type
matrices) have ``X_0`` as a solution of ``Phi(X) = 0``. On the slice
``X(u, v) = exp(uS + vT)`` the residual is ``F_1 S + F_2 T``, and a sign
pattern of ``(F_1, F_2)`` on the edges of a small rectangle away from
``(3, 0)`` certifies a second zero.

Everything here uses the 2x2 closed forms: for det-one SPD ``G`` with
``t = tr(G)/2``, ``log G = arcosh(t)/sqrt(t^2 - 1) * (G - G^{-1})/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .meansm import MeanProblem, SolverOptions
from .pdcore import DomainError, thompson
from .speqsolve import residual

S = np.array([[1.0, 0.0], [0.0, -1.0]])
T = np.array([[0.0, 1.0], [1.0, 0.0]])
C = 1.9


@dataclass(frozen=True)
class Rect2:
    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        if not (self.u_lo < self.u_hi and self.v_lo < self.v_hi):
            raise ValueError("rectangle needs u_lo < u_hi and v_lo < v_hi")

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.u_lo + self.u_hi), 0.5 * (self.v_lo + self.v_hi)

    def contains(self, u: float, v: float) -> bool:
        return self.u_lo <= u <= self.u_hi and self.v_lo <= v <= self.v_hi

    def translated(self, du: float, dv: float) -> "Rect2":
        return Rect2(self.u_lo + du, self.u_hi + du, self.v_lo + dv, self.v_hi + dv)

    def quarters(self) -> list:
        uc, vc = self.center
        return [Rect2(a, b, c, d) for a, b in ((self.u_lo, uc), (uc, self.u_hi))
                for c, d in ((self.v_lo, vc), (vc, self.v_hi))]


REFERENCE_RECT = Rect2(1.61247432825, 1.62347432825, 0.5194188906, 0.5254188906)

# reference one-sided edge bounds: left F1 >=, right F1 <=, bottom F2 >=, top F2 <=
EDGE_BOUNDS = {"left": 1.0e-4, "right": -9.2e-5, "bottom": 9.9e-6, "top": -4.7e-6}


def _exp_traceless(u: float, v: float) -> np.ndarray:
    # (uS + vT)^2 = r^2 I, so exp(uS + vT) = e^r P + e^{-r} (I - P) with the
    # projector P = (I + (uS + vT)/r)/2. The factors 1 +- u/r are formed
    # without cancellation.
    r = math.hypot(u, v)
    if r == 0.0:
        return np.eye(2)
    if u >= 0.0:
        p, q = 1.0 + u / r, v * v / (r * (r + u))
    else:
        p, q = v * v / (r * (r - u)), 1.0 - u / r
    ep, em = math.exp(r), math.exp(-r)
    off = math.sinh(r) * v / r
    return np.array([[0.5 * (ep * p + em * q), off], [off, 0.5 * (ep * q + em * p)]])


def x_of_uv(u: float, v: float) -> np.ndarray:
    """``exp(uS + vT) = cosh(r) I + sinh(r)/r (uS + vT)``, ``r = |(u, v)|``."""
    return _exp_traceless(u, v)


def build_instance() -> tuple:
    """``(A_1, A_2, A_3, X_0, weights)`` of the three-matrix instance."""
    X0 = _exp_traceless(3.0, 0.0)
    Bs = [_exp_traceless(3.0, 0.0), _exp_traceless(0.0, C), _exp_traceless(-3.0, -C)]
    As = [0.5 * (M + M.T) for M in (B @ X0 @ B for B in Bs)]
    return As[0], As[1], As[2], X0, np.full(3, 1.0 / 3.0)


def instance_problem() -> MeanProblem:
    A1, A2, A3, _, w = build_instance()
    return MeanProblem(w, [A1, A2, A3])


def log2x2_det1(G: np.ndarray, det_tol: float = 1e-10) -> np.ndarray:
    """Logarithm of a 2x2 SPD matrix of determinant one in closed form."""
    G = np.asarray(G, dtype=float)
    if G.shape != (2, 2):
        raise ValueError("log2x2_det1 needs a 2x2 matrix")
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if abs(det - 1.0) > det_tol:
        raise DomainError(f"det G = {det!r} is not 1 within {det_tol:g}")
    t = 0.5 * (G[0, 0] + G[1, 1])
    if t <= 1.0:
        return np.zeros((2, 2))
    # G^{-1} for det one is the adjugate
    M = 0.5 * (G - np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]]))
    return (math.acosh(t) / math.sqrt(t * t - 1.0)) * M


def _g_matrices(As, u: float, v: float) -> list:
    # A # X^{-1} for det-one 2x2 SPD pair: (A + X^{-1}) / sqrt(det(A + X^{-1}))
    Xi = _exp_traceless(-u, -v)
    out = []
    for A in As:
        M = A + Xi
        out.append(M / math.sqrt(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]))
    return out


def f_uv(u: float, v: float, instance: Optional[tuple] = None) -> tuple[float, float]:
    """Coordinates ``(F_1, F_2)`` of the residual at ``X(u, v)`` in the basis ``S, T``."""
    As = (instance or build_instance())[:3]
    F1 = F2 = 0.0
    for G in _g_matrices(As, u, v):
        a, b, d = G[0, 0], G[0, 1], G[1, 1]
        t = 0.5 * (a + d)
        theta = math.acosh(t) / math.sqrt(t * t - 1.0) if t > 1.0 else 1.0
        # (G - G^{-1})/2 = [[(a - d)/2, b], [b, (d - a)/2]]
        F1 += theta * 0.5 * (a - d)
        F2 += theta * b
    return F1 / 3.0, F2 / 3.0


def closed_form_residual(u: float, v: float, instance: Optional[tuple] = None) -> np.ndarray:
    F1, F2 = f_uv(u, v, instance)
    return F1 * S + F2 * T


def residual_x0_closed_form() -> float:
    """Frobenius norm of ``Phi(X_0)`` by the closed form."""
    return float(np.linalg.norm(closed_form_residual(3.0, 0.0)))


@dataclass
class MirandaReport:
    certified: bool
    rect: Rect2
    samples_per_edge: int
    margin: float
    # sign-relevant extremum per edge: min F1 (left), max F1 (right), min F2 (bottom), max F2 (top)
    edge_extrema: dict = field(default_factory=dict)
    edge_ok: dict = field(default_factory=dict)

    def meets_bounds(self, bounds: dict = EDGE_BOUNDS) -> bool:
        e = self.edge_extrema
        return (e["left"] >= bounds["left"] and e["right"] <= bounds["right"]
                and e["bottom"] >= bounds["bottom"] and e["top"] <= bounds["top"])


def miranda_certify(
    rect: Rect2 = REFERENCE_RECT,
    samples_per_edge: int = 4096,
    margin: float = 1e-6,
    F: Optional[Callable[[float, float], tuple]] = None,
) -> MirandaReport:
    """Check the edge sign pattern of ``F`` on ``rect`` by sampling.

    ``F_1 >= margin`` on ``u = u_lo``, ``F_1 <= -margin`` on ``u = u_hi``,
    ``F_2 >= margin`` on ``v = v_lo`` and ``F_2 <= -margin`` on ``v = v_hi``,
    at equally spaced samples that include the corners. This is numerical
    evidence, not interval arithmetic.
    """
    if samples_per_edge < 2:
        raise ValueError("samples_per_edge must be at least 2")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if F is None:
        inst = build_instance()
        F = lambda u, v: f_uv(u, v, inst)  # noqa: E731
    us = np.linspace(rect.u_lo, rect.u_hi, samples_per_edge)
    vs = np.linspace(rect.v_lo, rect.v_hi, samples_per_edge)
    ext = {
        "left": min(F(rect.u_lo, v)[0] for v in vs),
        "right": max(F(rect.u_hi, v)[0] for v in vs),
        "bottom": min(F(u, rect.v_lo)[1] for u in us),
        "top": max(F(u, rect.v_hi)[1] for u in us),
    }
    ok = {
        "left": bool(ext["left"] >= margin),
        "right": bool(ext["right"] <= -margin),
        "bottom": bool(ext["bottom"] >= margin),
        "top": bool(ext["top"] <= -margin),
    }
    return MirandaReport(all(ok.values()), rect, samples_per_edge, margin,
                         {k: float(x) for k, x in ext.items()}, ok)


@dataclass
class SecondSolution:
    u: float
    v: float
    X: np.ndarray
    F: tuple
    residual: float
    distance_to_x0: float
    iterations: int
    converged: bool
    subdivisions: int = 0


def _newton2(F, u, v, rect: Rect2, tol: float, max_iter: int, h: float = 1e-7):
    f = np.array(F(u, v))
    it = 0
    while np.max(np.abs(f)) > tol and it < max_iter:
        it += 1
        J = np.column_stack([
            (np.array(F(u + h, v)) - np.array(F(u - h, v))) / (2 * h),
            (np.array(F(u, v + h)) - np.array(F(u, v - h))) / (2 * h),
        ])
        d = np.linalg.solve(J, -f)
        lam = 1.0
        while lam > 2.0**-30:
            un, vn = u + lam * d[0], v + lam * d[1]
            fn = np.array(F(un, vn))
            if np.max(np.abs(fn)) < np.max(np.abs(f)):
                break
            lam *= 0.5
        else:
            break
        if not rect.contains(un, vn):
            return u, v, f, it, False
        u, v, f = un, vn, fn
    return u, v, f, it, bool(np.max(np.abs(f)) <= tol)


def find_second_solution(rect: Rect2 = REFERENCE_RECT, opts: Optional[SolverOptions] = None,
                         root_tol: float = 1e-12) -> SecondSolution:
    """Root of ``(F_1, F_2)`` inside ``rect`` by 2-D damped Newton.

    Starts at the rectangle center with a central-difference Jacobian. If an
    iterate leaves ``rect`` the rectangle is split into quarters and the
    quarter whose center has the smallest ``|F|`` is tried next.
    """
    opts = opts or SolverOptions()
    inst = build_instance()
    F = lambda u, v: f_uv(u, v, inst)  # noqa: E731
    box, splits, total = rect, 0, 0
    while True:
        u, v, f, it, ok = _newton2(F, *box.center, rect, root_tol, opts.max_iter)
        total += it
        if ok or splits >= 20:
            break
        box = min(box.quarters(), key=lambda q: float(np.max(np.abs(F(*q.center)))))
        splits += 1
    X = x_of_uv(u, v)
    P = MeanProblem(inst[4], list(inst[:3]))
    _, r = residual(P, X, accurate=True)
    d = thompson(X, inst[3])
    out = SecondSolution(u, v, X, (float(f[0]), float(f[1])), r, d, total, ok, splits)
    if ok and (r > 1e-10 or d <= 0.1):
        out.converged = False
    return out


@dataclass
class Reproduction:
    residual_x0: float
    residual_x0_generic: float
    certificate: MirandaReport
    second: SecondSolution

    @property
    def ok(self) -> bool:
        return (self.residual_x0 <= 1e-12 and self.certificate.certified
                and self.certificate.meets_bounds() and self.second.converged
                and REFERENCE_RECT.contains(self.second.u, self.second.v))


def reproduce(samples_per_edge: int = 4096, margin: float = 1e-6,
              opts: Optional[SolverOptions] = None) -> Reproduction:
    """Residual at ``X_0``, edge certificate of the reference rectangle, and ``X_*``."""
    P = instance_problem()
    _, r_generic = residual(P, build_instance()[3], accurate=True)
    return Reproduction(
        residual_x0_closed_form(),
        r_generic,
        miranda_certify(REFERENCE_RECT, samples_per_edge, margin),
        find_second_solution(REFERENCE_RECT, opts),
    )
