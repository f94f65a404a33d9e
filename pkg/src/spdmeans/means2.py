"""Two-variable means of SPD matrices and their defining-equation checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .pdcore import (
    DomainError,
    inv,
    matrix_fn,
    sqrt_and_invsqrt,
    sym,
)

Scalar = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RepFunction:
    """A named scalar generator.

    ``g`` is a member of the family used by generalized Karcher equations
    (``g(1) = 0``, ``g'(1) = 1``); ``f`` is a representing function of an
    operator mean (``f(1) = 1``). Either may be ``None``.
    """

    name: str
    g: Optional[Scalar] = None
    f: Optional[Scalar] = None
    f_inv: Optional[Scalar] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        one = np.array([1.0])
        if self.g is not None:
            if abs(float(self.g(one)[0])) > 1e-14:
                raise ValueError(f"{self.name}: g(1) must be 0")
            h = 1e-5
            d = float((self.g(one + h) - self.g(one - h))[0]) / (2 * h)
            if abs(d - 1.0) > 1e-6:
                raise ValueError(f"{self.name}: g'(1) must be 1 (got {d:.8g})")
        if self.f is not None and abs(float(self.f(one)[0]) - 1.0) > 1e-14:
            raise ValueError(f"{self.name}: f(1) must be 1")

    def __str__(self) -> str:
        if "t" in self.params:
            return f"{self.name}:{self.params['t']!r}"
        return self.name


def _g_power(t: float) -> Scalar:
    return lambda x: (np.power(x, t) - 1.0) / t


G_LOG = RepFunction("log", g=np.log)
G_LINEAR = RepFunction("linear", g=lambda x: x - 1.0)
G_INVERSE = RepFunction("inverse", g=lambda x: 1.0 - 1.0 / x)


def g_power(t: float) -> RepFunction:
    """``g(x) = (x^t - 1)/t``, ``t`` in ``[-1, 1]`` and nonzero."""
    if t == 0 or not -1 <= t <= 1:
        raise ValueError("power generator needs t in [-1, 1] \\ {0}")
    return RepFunction("power", g=_g_power(t), params={"t": t})


def f_geometric(t: float) -> RepFunction:
    """``f(x) = x^t``: the weighted geometric mean."""
    return RepFunction(
        "geometric", f=lambda x: np.power(x, t),
        f_inv=(lambda y: np.power(y, 1.0 / t)) if t != 0 else None, params={"t": t},
    )


def f_arithmetic(t: float) -> RepFunction:
    """``f(x) = (1 - t) + t x``: the weighted arithmetic mean."""
    return RepFunction(
        "arithmetic", f=lambda x: (1.0 - t) + t * np.asarray(x),
        f_inv=(lambda y: (np.asarray(y) - (1.0 - t)) / t) if t != 0 else None, params={"t": t},
    )


def f_harmonic(t: float) -> RepFunction:
    """``f(x) = ((1 - t) + t / x)^{-1}``: the weighted harmonic mean."""
    return RepFunction(
        "harmonic", f=lambda x: 1.0 / ((1.0 - t) + t / np.asarray(x)),
        f_inv=(lambda y: t / (1.0 / np.asarray(y) - (1.0 - t))) if t != 0 else None,
        params={"t": t},
    )


def f_constant() -> RepFunction:
    return RepFunction("one", f=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                       f_inv=None)


G_CATALOG = {"log": G_LOG, "linear": G_LINEAR, "inverse": G_INVERSE}
F_CATALOG = {"geometric": f_geometric, "arithmetic": f_arithmetic, "harmonic": f_harmonic}


def parse_g(spec: str) -> RepFunction:
    """Parse a generator name: ``log``, ``linear`` (x-1), ``inverse`` (1-1/x), ``power:T``."""
    aliases = {"x-1": "linear", "1-1/x": "inverse"}
    spec = aliases.get(spec, spec)
    if spec in G_CATALOG:
        return G_CATALOG[spec]
    name, _, arg = spec.partition(":")
    if name == "power" and arg:
        return g_power(float(arg))
    raise ValueError(f"unknown generator {spec!r}; expected log, linear, inverse or power:T")


def parse_f(spec: str, t: Optional[float] = None) -> RepFunction:
    """Parse a representing-function name, ``NAME`` or ``NAME:T``."""
    name, _, arg = spec.partition(":")
    if arg:
        t = float(arg)
    if name == "one":
        return f_constant()
    if name not in F_CATALOG:
        raise ValueError(f"unknown representing function {spec!r}")
    if t is None:
        raise ValueError(f"representing function {name!r} needs a parameter t")
    return F_CATALOG[name](t)


def geo_mean_t(A: np.ndarray, B: np.ndarray, t: float = 0.5) -> np.ndarray:
    """Weighted metric geometric mean ``A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}``.

    Any real ``t`` is accepted (the geodesic through ``A`` and ``B``
    extended beyond the segment). The computation is based at the better
    conditioned of the two arguments, using ``A #_t B = B #_{1-t} A``.
    """
    wa, wb = np.linalg.eigvalsh(A), np.linalg.eigvalsh(B)
    if wb[-1] * wa[0] < wa[-1] * wb[0]:
        A, B, t = B, A, 1.0 - t
    Ah, Aih = sqrt_and_invsqrt(A)
    return sym(Ah @ matrix_fn(sym(Aih @ B @ Aih), lambda w: np.power(w, t)) @ Ah)


def geo_mean(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return geo_mean_t(A, B, 0.5)


class ConsistencyError(RuntimeError):
    """An internal residual check failed."""


def riccati_solve(A: np.ndarray, B: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Positive definite solution of ``X A^{-1} X = B``, i.e. ``A # B``."""
    X = geo_mean(A, B)
    res = np.linalg.norm(X @ np.linalg.solve(A, X) - B)
    if res > rtol * np.linalg.norm(B):
        raise ConsistencyError(f"Riccati residual {res:.3e} exceeds {rtol:g} * ||B||")
    return X


def _check_unit_t(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")


def spectral_mean_t(A: np.ndarray, B: np.ndarray, t: float = 0.5) -> np.ndarray:
    """Weighted spectral geometric mean ``(A^{-1} # B)^t A (A^{-1} # B)^t``."""
    _check_unit_t(t)
    G = geo_mean(inv(A), B)
    Gt = matrix_fn(G, lambda w: np.power(w, t))
    return sym(Gt @ A @ Gt)


def wasserstein2_t(A: np.ndarray, B: np.ndarray, t: float = 0.5) -> np.ndarray:
    """Weighted Bures-Wasserstein mean ``(I +_t G) A (I +_t G)``, ``G = A^{-1} # B``."""
    _check_unit_t(t)
    n = A.shape[0]
    M = (1.0 - t) * np.eye(n) + t * geo_mean(inv(A), B)
    return sym(M @ A @ M)


def alt_mean(A: np.ndarray, B: np.ndarray, f: RepFunction) -> np.ndarray:
    """Alternative mean ``f(A^{-1} # B) A f(A^{-1} # B)``."""
    if f.f is None:
        raise ValueError(f"{f.name} has no representing function f")
    G = geo_mean(inv(A), B)
    w, Q = np.linalg.eigh(G)
    fw = np.asarray(f.f(w), dtype=float)
    if np.any(~np.isfinite(fw)) or np.any(fw <= 0):
        raise DomainError(f"{f.name} is not positive on the spectrum of A^-1 # B")
    F = sym((Q * fw) @ Q.T)
    return sym(F @ A @ F)


def kubo_ando(U: np.ndarray, V: np.ndarray, f: RepFunction) -> np.ndarray:
    """Operator mean ``U^{1/2} f(U^{-1/2} V U^{-1/2}) U^{1/2}``."""
    Uh, Uih = sqrt_and_invsqrt(U)
    return sym(Uh @ matrix_fn(sym(Uih @ V @ Uih), f.f) @ Uh)


def verify_alt_equation(A: np.ndarray, B: np.ndarray, f: RepFunction, X: np.ndarray) -> float:
    """Frobenius norm of ``(A # X^{-1}) sigma_f (B # X^{-1}) - I``."""
    Xi = inv(X)
    U = geo_mean(Xi, A)
    V = geo_mean(Xi, B)
    return float(np.linalg.norm(kubo_ando(U, V, f) - np.eye(A.shape[0])))


def wasserstein2_expanded(A: np.ndarray, B: np.ndarray, t: float) -> np.ndarray:
    """Quadratic expansion ``(1-t)^2 A + t^2 B + t(1-t)(A G + G A)``."""
    G = geo_mean(inv(A), B)
    return sym((1 - t) ** 2 * A + t**2 * B + t * (1 - t) * (A @ G + G @ A))


def spectral_semi_distance(A: np.ndarray, B: np.ndarray) -> float:
    """``||log(A^{-1} # B)||`` in the spectral norm."""
    w = np.linalg.eigvalsh(geo_mean(inv(A), B))
    return float(np.max(np.abs(np.log(w))))


__all__ = [
    "RepFunction", "G_LOG", "G_LINEAR", "G_INVERSE", "g_power", "f_geometric",
    "f_arithmetic", "f_harmonic", "f_constant", "parse_g", "parse_f", "geo_mean_t",
    "geo_mean", "riccati_solve", "spectral_mean_t", "wasserstein2_t", "alt_mean",
    "kubo_ando", "verify_alt_equation", "wasserstein2_expanded", "ConsistencyError",
    "spectral_semi_distance",
]
