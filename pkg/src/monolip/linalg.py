"""Small dense linear-algebra helpers used by the weight normalizations.

Vectors and matrices are plain ``numpy`` float64 arrays. Weight matrices use
the (out, in) convention, so the operator norm induced by the vector 1-norm
is the largest absolute *column* sum: each column collects everything one
input feeds forward.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "as_vector",
    "as_matrix",
    "one_norm",
    "column_abs_sums",
    "scale_columns",
    "matvec",
    "add",
    "axpy",
]


class ShapeError(ValueError):
    """Raised when operands have incompatible shapes."""


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")


def as_vector(v) -> np.ndarray:
    """Validate and convert ``v`` to a finite, non-empty 1-D float64 array."""
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {a.shape}")
    _check_finite(a, "vector")
    return a


def as_matrix(m) -> np.ndarray:
    """Validate and convert ``m`` to a finite, non-empty 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    _check_finite(a, "matrix")
    return a


def column_abs_sums(m: np.ndarray) -> np.ndarray:
    """Absolute sum of every column, ``s[k] = sum_j |m[j, k]|``."""
    return np.abs(as_matrix(m)).sum(axis=0)


def one_norm(m: np.ndarray) -> float:
    """Operator norm induced by the vector 1-norm (max absolute column sum)."""
    return float(column_abs_sums(m).max())


def scale_columns(m: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Return ``m @ diag(s)``."""
    m = as_matrix(m)
    s = as_vector(s)
    if s.shape[0] != m.shape[1]:
        raise ShapeError(f"cannot scale {m.shape[1]} columns by {s.shape[0]} factors")
    return m * s[np.newaxis, :]


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"matrix {m.shape} incompatible with vector of length {v.shape[0]}")
    return m @ v


def add(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    v, w = as_vector(v), as_vector(w)
    if v.shape != w.shape:
        raise ShapeError(f"length mismatch: {v.shape[0]} vs {w.shape[0]}")
    return v + w


def axpy(a: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Return ``a * v + w``."""
    v, w = as_vector(v), as_vector(w)
    if v.shape != w.shape:
        raise ShapeError(f"length mismatch: {v.shape[0]} vs {w.shape[0]}")
    return a * v + w
