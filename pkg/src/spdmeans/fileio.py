"""
Problem and report files
~~~~~~~~~~~~~~~~~~~~~~~~
Both are JSON documents. Matrix entries and weights are stored as decimal
strings with 17 significant digits, which round-trips every double exactly.
Reports are written to a temporary file in the target directory and renamed
into place.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import warnings
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .meansm import MeanProblem

SCHEMA_VERSION = 1
WEIGHT_SUM_TOL = 1e-8
SYMMETRY_TOL = 1e-12


class InputError(ValueError):
    """A problem file is malformed; the message names the offending field."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def encode_matrix(M: np.ndarray) -> list:
    return [[fmt(x) for x in row] for row in np.asarray(M, dtype=float)]


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool):
        raise InputError(f"{where}: expected a number, got {x!r}")
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise InputError(f"{where}: expected a number, got {x!r}") from None
    if not math.isfinite(v):
        raise InputError(f"{where}: non-finite value {x!r}")
    return v


def decode_matrix(rows: Any, where: str = "matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InputError(f"{where}: expected a non-empty list of rows")
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            raise InputError(f"{where}: row {i} has {len(r)} entries, expected {n}")
    return np.array([[_number(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)]
                     for i, r in enumerate(rows)])


def problem_to_dict(P: MeanProblem, labels: Optional[Sequence[str]] = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": P.n,
        "m": P.m,
        "weights": [fmt(w) for w in P.weights],
        "matrices": [encode_matrix(A) for A in P.matrices],
    }
    if labels is not None:
        doc["labels"] = list(labels)
    return doc


def load_json(path) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def problem_from_dict(doc: Any, source: str = "problem") -> MeanProblem:
    """Validate a decoded problem document.

    Errors name the field: ``symmetry violation at (i,j)``,
    ``matrix k not positive definite (min eig = ...)`` and weight sums off
    by more than ``1e-8``. Smaller weight drift is renormalized with a
    warning.
    """
    if not isinstance(doc, dict):
        raise InputError(f"{source}: top level must be an object")
    for key in ("schema_version", "n", "m", "weights", "matrices"):
        if key not in doc:
            raise InputError(f"{source}: missing field {key!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise InputError(f"{source}: schema_version {doc['schema_version']!r} is not supported "
                         f"(expected {SCHEMA_VERSION})")
    n, m = doc["n"], doc["m"]
    if not (isinstance(n, int) and n >= 1 and isinstance(m, int) and m >= 1):
        raise InputError(f"{source}: n and m must be positive integers")
    if not isinstance(doc["weights"], list) or len(doc["weights"]) != m:
        raise InputError(f"{source}: weights must be a list of {m} numbers")
    if not isinstance(doc["matrices"], list) or len(doc["matrices"]) != m:
        raise InputError(f"{source}: matrices must be a list of {m} matrices")
    w = np.array([_number(x, f"{source}: weights[{i}]") for i, x in enumerate(doc["weights"])])
    if np.any(w < 0):
        raise InputError(f"{source}: weights[{int(np.argmin(w))}] is negative")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise InputError(f"{source}: weights sum to {total!r}, not 1 (tolerance {WEIGHT_SUM_TOL:g})")
    if total != 1.0:
        warnings.warn(f"{source}: weights sum to {total!r}; renormalized", stacklevel=2)
    mats = []
    for k, rows in enumerate(doc["matrices"]):
        A = decode_matrix(rows, f"{source}: matrices[{k}]")
        if A.shape != (n, n):
            raise InputError(f"{source}: matrices[{k}] is {A.shape[0]}x{A.shape[1]}, expected {n}x{n}")
        scale = max(1.0, float(np.max(np.abs(A))))
        for i in range(n):
            for j in range(i + 1, n):
                if abs(A[i, j] - A[j, i]) > SYMMETRY_TOL * scale:
                    raise InputError(f"{source}: matrices[{k}]: symmetry violation at ({i},{j})")
        A = 0.5 * (A + A.T)
        ev = np.linalg.eigvalsh(A)
        if not ev[0] > n * np.finfo(float).eps * ev[-1] or ev[-1] <= 0:
            raise InputError(f"{source}: matrix {k} not positive definite (min eig = {ev[0]!r})")
        mats.append(A)
    labels = doc.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != m):
        raise InputError(f"{source}: labels must be a list of {m} strings")
    return MeanProblem(w / total, mats)


def parse_problem(path) -> MeanProblem:
    """Read and validate a problem file."""
    return problem_from_dict(load_json(path), str(path))


def read_matrix_file(path) -> np.ndarray:
    """A single matrix from ``{"matrix": ...}``, or the ``solution`` of a report."""
    doc = load_json(path)
    if isinstance(doc, dict):
        for key in ("matrix", "solution"):
            if key in doc:
                return decode_matrix(doc[key], f"{path}: {key}")
        res = doc.get("results")
        if isinstance(res, dict) and "solution" in res:
            return decode_matrix(res["solution"], f"{path}: results.solution")
    raise InputError(f"{path}: expected a 'matrix' field or a report with a solution")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def jsonable(x: Any) -> Any:
    """Convert results to JSON: arrays become 17-digit string matrices."""
    if isinstance(x, np.ndarray):
        if x.ndim == 2:
            return encode_matrix(x)
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    return x


def dumps(doc: Any) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc: Any) -> None:
    write_atomic(path, dumps(doc))
