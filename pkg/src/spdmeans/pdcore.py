"""
Symmetric matrix machinery
~~~~~~~~~~~~~~~~~~~~~~~~~~
Eigendecomposition-based matrix functions, distances and order relations on
the cone of real symmetric positive definite (SPD) matrices, plus compound
matrices (antisymmetric tensor powers).

Matrices are plain ``numpy.ndarray`` objects. Functions that accept SPD input
from the outside validate it with :func:`as_spd`; internal callers pass
already-validated arrays.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EPS = np.finfo(float).eps
DEFAULT_TOL = 1e-10


class SPDError(ValueError):
    """Input is not a (numerically) symmetric positive definite matrix."""


class DomainError(ValueError):
    """A scalar function is not finite (or not admissible) on a spectrum."""


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def as_sym(A, name: str = "matrix") -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return sym(A)


def as_spd(A, name: str = "matrix") -> np.ndarray:
    """Symmetrize ``A`` and check strict positive definiteness.

    The acceptance floor is relative: ``min eig > n * eps * max eig``.
    """
    A = as_sym(A, name)
    w = np.linalg.eigvalsh(A)
    n = A.shape[0]
    if not (w[-1] > 0 and w[0] > n * EPS * w[-1]):
        raise SPDError(f"{name} not positive definite (min eig = {w[0]:.6g})")
    return A


def is_spd(A) -> bool:
    try:
        as_spd(A)
    except (SPDError, ValueError):
        return False
    return True


def eigh(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching orthonormal eigenvectors."""
    w, Q = np.linalg.eigh(A)
    return w[::-1], Q[:, ::-1]


def jacobi_eigh(A, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Iterates until the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``. Returns eigenvalues in descending order and the
    eigenvector matrix. Slow but independent of LAPACK; used as a cross-check.
    """
    A = as_sym(A).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # Rutishauser's stable rotation
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                A[p, q] = A[q, p] = 0.0
                V = V @ R
    w = np.diag(A).copy()
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def matrix_fn(A: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply the scalar map ``f`` to a symmetric matrix through its spectrum.

    Returns ``Q diag(f(lambda)) Q^T`` symmetrized.
    """
    w, Q = np.linalg.eigh(A)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fw = np.asarray(f(w), dtype=float)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(f"function not finite at eigenvalue {w[bad][0]:.6g}")
    return sym((Q * fw) @ Q.T)


def sqrtm(A: np.ndarray) -> np.ndarray:
    return matrix_fn(A, np.sqrt)


def invsqrtm(A: np.ndarray) -> np.ndarray:
    return matrix_fn(A, lambda w: 1.0 / np.sqrt(w))


def sqrt_and_invsqrt(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, Q = np.linalg.eigh(A)
    if w[0] <= 0:
        raise DomainError(f"square root requires positive spectrum (min eig = {w[0]:.6g})")
    r = np.sqrt(w)
    return sym((Q * r) @ Q.T), sym((Q / r) @ Q.T)


def logm(A: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return matrix_fn(A, np.log)


def expm(H: np.ndarray) -> np.ndarray:
    return matrix_fn(H, np.exp)


def powm(A: np.ndarray, t: float) -> np.ndarray:
    return matrix_fn(A, lambda w: w**t)


def inv(A: np.ndarray) -> np.ndarray:
    return matrix_fn(A, lambda w: 1.0 / w)


def congruence(S, A: np.ndarray) -> np.ndarray:
    """``S A S^T`` for an invertible ``S``; raises if ``S`` is numerically singular."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] != A.shape[0]:
        raise ValueError("congruence factor must be square and match the matrix dimension")
    if not np.isfinite(np.linalg.cond(S)) or np.linalg.cond(S) >= 1e12:
        raise ValueError("congruence factor is numerically singular")
    return sym(S @ A @ S.T)


def _check_pair(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")


def relative_eigs(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``A^{-1/2} B A^{-1/2}`` (ascending)."""
    Aih = invsqrtm(A)
    return np.linalg.eigvalsh(sym(Aih @ B @ Aih))


def _inv_geo(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # A^{-1} # B = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}
    Ah, Aih = sqrt_and_invsqrt(A)
    return sym(Aih @ sqrtm(sym(Ah @ B @ Ah)) @ Aih)


def distance(kind: str, A, B) -> float:
    """Distance between two SPD matrices.

    Parameters
    ----------
    kind : {"riemannian", "thompson", "wasserstein", "spectral_semi"}
        ``riemannian`` is the Frobenius norm of ``log(A^{-1/2} B A^{-1/2})``,
        ``thompson`` its spectral norm, ``wasserstein`` the Bures-Wasserstein
        distance, and ``spectral_semi`` the spectral norm of
        ``log(A^{-1} # B)``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_pair(A, B)
    if kind == "riemannian":
        return float(np.sqrt(np.sum(np.log(relative_eigs(A, B)) ** 2)))
    if kind == "thompson":
        return float(np.max(np.abs(np.log(relative_eigs(A, B)))))
    if kind == "wasserstein":
        Ah = sqrtm(A)
        cross = sqrtm(sym(Ah @ B @ Ah))
        return float(math.sqrt(max(np.trace(A) + np.trace(B) - 2.0 * np.trace(cross), 0.0)))
    if kind == "spectral_semi":
        return float(np.max(np.abs(np.log(np.linalg.eigvalsh(_inv_geo(A, B))))))
    raise ValueError(f"unknown distance kind {kind!r}")


def thompson(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.max(np.abs(np.log(relative_eigs(A, B)))))


@dataclass(frozen=True)
class OrderResult:
    """Outcome of an order test; ``margin`` is the worst slack (negative on failure)."""

    holds: bool
    margin: float
    relation: str

    def __bool__(self) -> bool:
        return self.holds


def _scale(*Ms: np.ndarray) -> float:
    return max([1.0] + [float(np.max(np.abs(np.linalg.eigvalsh(M)))) for M in Ms])


def _log_prefix_sums(A: np.ndarray) -> np.ndarray:
    w = np.sort(np.linalg.eigvalsh(A))[::-1]
    return np.cumsum(np.log(w))


def order_check(relation: str, A, B, tol: float = DEFAULT_TOL) -> OrderResult:
    """Check ``A <= B`` in one of several partial orders.

    ``loewner`` and ``strict_loewner`` compare ``min eig(B - A)`` with a
    tolerance scaled by the spectral radius of the operands. ``near`` tests
    ``A^{-1} # B >= I``. ``eig_pointwise`` compares sorted spectra.
    ``weak_log_major`` compares leading eigenvalue products up to a factor
    ``1 + tol`` and ``log_major`` adds ``|det A - det B| <= tol |det B|``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_pair(A, B)
    if relation in ("loewner", "strict_loewner"):
        m = float(np.linalg.eigvalsh(sym(B - A))[0])
        if relation == "loewner":
            margin = m + tol * _scale(A, B)
            return OrderResult(margin >= 0, margin, relation)
        return OrderResult(m > 0, m, relation)
    if relation == "eig_pointwise":
        a = np.sort(np.linalg.eigvalsh(A))
        b = np.sort(np.linalg.eigvalsh(B))
        margin = float(np.min(b - a)) + tol * _scale(A, B)
        return OrderResult(margin >= 0, margin, relation)
    if relation not in ("near", "log_major", "weak_log_major"):
        raise ValueError(f"unknown relation {relation!r}")
    for M, nm in ((A, "A"), (B, "B")):
        if not is_spd(M):
            raise SPDError(f"relation {relation!r} requires SPD operands ({nm} is not)")
    if relation == "near":
        m = float(np.linalg.eigvalsh(_inv_geo(A, B))[0])
        margin = m - (1.0 - tol)
        return OrderResult(margin >= 0, margin, relation)
    la = _log_prefix_sums(A)
    lb = _log_prefix_sums(B)
    slack = lb + math.log1p(tol) - la
    margin = float(np.min(slack))
    holds = margin >= 0
    if relation == "log_major":
        da, db = math.exp(la[-1]), math.exp(lb[-1])
        det_slack = tol * abs(db) - abs(da - db)
        holds = holds and det_slack >= 0
        margin = min(margin, det_slack / max(abs(db), np.finfo(float).tiny))
    return OrderResult(bool(holds), margin, relation)


def log_major_slack(A: np.ndarray, B: np.ndarray) -> float:
    """Smallest ``sum_{j<=k} log lambda_j(B) - log lambda_j(A)`` over ``k``."""
    return float(np.min(_log_prefix_sums(B) - _log_prefix_sums(A)))


def compound(A, k: int) -> np.ndarray:
    """k-th compound matrix: all k x k minors, subsets in lexicographic order."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"compound order k={k} out of range 1..{n}")
    subsets = list(itertools.combinations(range(n), k))
    C = np.empty((len(subsets), len(subsets)))
    for a, I in enumerate(subsets):
        rows = A[list(I), :]
        for b, J in enumerate(subsets):
            C[a, b] = np.linalg.det(rows[:, list(J)])
    return C


def normalize_weights(w, tol: float = 1e-14) -> np.ndarray:
    """Positive probability vector; renormalizes so the sum is 1 within ``tol``."""
    w = np.asarray(w, dtype=float).ravel()
    if w.size < 1:
        raise ValueError("weight vector is empty")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")
    w = w / math.fsum(w)
    assert abs(math.fsum(w) - 1.0) <= tol
    return w
