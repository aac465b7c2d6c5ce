"""Dense linear-algebra kernels sized for n up to ~1000 and p up to ~1e6.

Matrices are plain float64 row-major numpy arrays.  The SPD factor/solve
pair is what the screening estimators run on (one n-by-n factorization per
screen); the small Jacobi SVD exists as an independent oracle for
pseudo-inverse checks and is never on a production path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import lapack

from .exceptions import (
    ConvergenceError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)

__all__ = [
    "SpdFactor",
    "as_data_matrix",
    "mat_mul",
    "gram_rows",
    "spd_factor",
    "spd_solve",
    "svd_small",
]


def as_data_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array, rejecting NaN/Inf."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass
class SpdFactor:
    """Lower-triangular Cholesky factor L with A = L @ L.T."""

    dim: int
    lower: np.ndarray


def mat_mul(a, b, transpose_a: bool = False, transpose_b: bool = False) -> np.ndarray:
    """Matrix product with optional transposition of either operand.

    Transposes are taken as views; nothing is materialized.  Raises
    DimensionMismatchError naming both effective shapes when the inner
    dimensions disagree.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatchError(
            f"mat_mul needs 2-D operands, got {a.shape} and {b.shape}"
        )
    aa = a.T if transpose_a else a
    bb = b.T if transpose_b else b
    if aa.shape[1] != bb.shape[0]:
        raise DimensionMismatchError(
            f"inner dimensions disagree: {aa.shape} x {bb.shape}"
        )
    return aa @ bb


def gram_rows(x) -> np.ndarray:
    """Row Gram matrix X @ X.T, symmetrized against rounding asymmetry."""
    x = np.asarray(x, dtype=np.float64)
    g = x @ x.T
    return (g + g.T) / 2.0


def spd_factor(a) -> SpdFactor:
    """Cholesky-factor a symmetric positive-definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        When a pivot is non-positive.  For a row Gram matrix this signals
        rank deficiency (p <= n or duplicated rows); the ridge-regularized
        screener remains well defined there, so the message points at it.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {a.shape}")
    scale = np.max(np.abs(a)) or 1.0
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric to 1e-10 relative")
    c, info = lapack.dpotrf(a, lower=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (pivot {info - 1} non-positive); "
            "for a rank-deficient Gram matrix use the ridge variant "
            "(ridge_holp_scores)",
            pivot=info - 1,
        )
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to dpotrf")
    # An exactly singular matrix can slip through dpotrf with a pivot at
    # rounding level; treat pivots collapsed below rounding as failures too.
    diag = np.diagonal(c)
    tol = 16.0 * a.shape[0] * np.finfo(np.float64).eps * np.max(np.diagonal(a))
    bad = np.flatnonzero(diag * diag < tol)
    if bad.size:
        raise NotPositiveDefiniteError(
            f"matrix is numerically singular (pivot {bad[0]} at rounding level); "
            "for a rank-deficient Gram matrix use the ridge variant "
            "(ridge_holp_scores)",
            pivot=int(bad[0]),
        )
    return SpdFactor(dim=a.shape[0], lower=np.tril(c))


def spd_solve(factor: SpdFactor, b) -> np.ndarray:
    """Solve A @ X = B given the Cholesky factor of A.

    Accepts a vector or a matrix right-hand side; the result has the same
    number of dimensions as the input.
    """
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    rhs = b[:, None] if vector else b
    if rhs.ndim != 2 or rhs.shape[0] != factor.dim:
        raise DimensionMismatchError(
            f"right-hand side has {rhs.shape[0]} rows, factor dimension is {factor.dim}"
        )
    x, info = lapack.dpotrs(factor.lower, rhs, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x[:, 0] if vector else x


@njit(cache=True, nogil=True)
def _jacobi_orthogonalize(w, v, max_sweeps, tol):  # pragma: no cover - jitted
    """One-sided Jacobi: rotate column pairs of w (accumulating v) until
    every pair is numerically orthogonal.  Returns +sweeps on convergence,
    -sweeps when the budget runs out."""
    m, n = w.shape
    sweeps = 0
    while sweeps < max_sweeps:
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                aa = 0.0
                bb = 0.0
                cc = 0.0
                for t in range(m):
                    aa += w[t, i] * w[t, i]
                    bb += w[t, j] * w[t, j]
                    cc += w[t, i] * w[t, j]
                if aa == 0.0 or bb == 0.0:
                    continue
                if abs(cc) <= tol * np.sqrt(aa * bb):
                    continue
                rotated = True
                tau = (bb - aa) / (2.0 * cc)
                if tau >= 0.0:
                    t_r = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t_r = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cs = 1.0 / np.sqrt(1.0 + t_r * t_r)
                sn = cs * t_r
                for t in range(m):
                    wi = w[t, i]
                    wj = w[t, j]
                    w[t, i] = cs * wi - sn * wj
                    w[t, j] = sn * wi + cs * wj
                for t in range(n):
                    vi = v[t, i]
                    vj = v[t, j]
                    v[t, i] = cs * vi - sn * vj
                    v[t, j] = sn * vi + cs * vj
        sweeps += 1
        if not rotated:
            return sweeps
    return -sweeps


def _complete_orthonormal(u: np.ndarray, m: int, count: int) -> np.ndarray:
    """Deterministically extend the columns of u to `count` extra
    orthonormal directions (Gram-Schmidt against the standard basis)."""
    cols = []
    for e in range(m):
        v = np.zeros(m)
        v[e] = 1.0
        if u.size:
            v -= u @ (u.T @ v)
        for c in cols:
            v -= c * (c @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
            if len(cols) == count:
                break
    return np.column_stack(cols)


def svd_small(a, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition A = U @ diag(s) @ V.T by one-sided Jacobi.

    Intended as an independent oracle at test scale (min(rows, cols) <= 512);
    the screening estimators never call it.  Singular values come back
    non-negative and descending, with U, V orthonormal.

    Raises
    ------
    ConvergenceError
        If the rotation sweeps do not converge within `max_sweeps`.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D matrix, got shape {a.shape}")
    m, n = a.shape
    if min(m, n) > 512:
        raise ValueError(
            f"svd_small is an oracle for min(rows, cols) <= 512, got {a.shape}"
        )
    if min(m, n) == 0:
        raise ValueError("cannot decompose an empty matrix")

    # Orthogonalize the columns of the tall side; transpose swaps U and V.
    flipped = m < n
    w = (a.T if flipped else a).copy()
    rows, cols = w.shape
    v = np.eye(cols)
    sweeps = _jacobi_orthogonalize(w, v, max_sweeps, 1e-13)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi SVD did not converge within {-sweeps} sweeps",
            iterations=-sweeps,
        )

    s = np.linalg.norm(w, axis=0)
    order = np.lexsort((np.arange(cols), -s))
    s = s[order]
    w = w[:, order]
    v = v[:, order]

    u = np.zeros_like(w)
    cutoff = max(rows, cols) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    good = s > cutoff
    u[:, good] = w[:, good] / s[good]
    missing = int(np.count_nonzero(~good))
    if missing:
        u[:, ~good] = _complete_orthonormal(u[:, good], rows, missing)
        s = s.copy()
        s[~good] = 0.0

    if flipped:
        return v, s, u
    return u, s, v
