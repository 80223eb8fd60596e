"""Dense float64 matrix helpers and the least-squares projection solve.

Everything here is a thin, contract-checked layer over numpy. The one
numerically serious operation is :func:`least_squares_project`, which always
goes through an SVD (``numpy.linalg.lstsq``) rather than the normal
equations: the normal-equations route squares the condition number and the
projection loss routinely meets rank-deficient design matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

DEFAULT_RTOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float64 row-major array."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {m.shape}")
    return m


def check_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape checking."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def add(a, b) -> np.ndarray:
    a, b = as_matrix(a, "left operand"), as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a + b


def sub(a, b) -> np.ndarray:
    a, b = as_matrix(a, "left operand"), as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a - b


def scale(a, s: float) -> np.ndarray:
    return as_matrix(a) * float(s)


def neg(a) -> np.ndarray:
    return -as_matrix(a)


@dataclass(frozen=True)
class LstsqResult:
    """Solution of a least-squares solve plus rank diagnostics.

    ``singular_floor`` is the absolute threshold below which singular values
    were treated as zero (rtol times the largest singular value).
    """

    solution: np.ndarray
    rank: int
    singular_floor: float


def least_squares_project(X, B, rtol: float = DEFAULT_RTOL) -> LstsqResult:
    """Minimum-norm least-squares solution of ``X @ W ~ B``.

    For full-rank X this equals the classic projection coefficient matrix
    (X^T X)^-1 X^T B; when X is rank-deficient, singular values below
    rtol * sigma_max are truncated, which yields the solution of smallest
    Frobenius norm.
    """
    X = check_finite(as_matrix(X, "X"), "X")
    B = check_finite(as_matrix(B, "B"), "B")
    if X.shape[0] != B.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but B has {B.shape[0]}")
    if not rtol > 0:
        raise ValueError(f"rtol must be positive, got {rtol}")
    solution, _, rank, sv = np.linalg.lstsq(X, B, rcond=rtol)
    floor = rtol * float(sv[0]) if sv.size else 0.0
    return LstsqResult(solution=solution, rank=int(rank), singular_floor=floor)


def projection_operator(X, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """The d x M operator mapping targets to projection coefficients.

    Equals (X^T X)^-1 X^T when X has full column rank, and the pseudo-inverse
    in general.
    """
    X = as_matrix(X, "X")
    return least_squares_project(X, np.eye(X.shape[0]), rtol).solution


def pullback(X, vec, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Apply the transpose of :func:`projection_operator` to a d-vector.

    Computed directly as the minimum-norm solve of X^T w ~ vec, which equals
    A^T vec without materializing A.
    """
    X = as_matrix(X, "X")
    v = np.ascontiguousarray(vec, dtype=np.float64).reshape(-1, 1)
    if v.shape[0] != X.shape[1]:
        raise ShapeError(f"vector length {v.shape[0]} does not match {X.shape[1]} columns")
    res = least_squares_project(np.ascontiguousarray(X.T), v, rtol)
    return res.solution[:, 0]
