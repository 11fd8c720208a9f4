"""Symmetric-matrix primitives: vectorization operators, sample covariance
and correlation estimators, and the generalized cosine between two symmetric
matrices under a choice of mapping.

All functions take and return plain ``numpy`` arrays.  Matrices produced by
this module are exactly symmetric: the lower triangle is the single source of
truth and is mirrored into the upper triangle, so ``M[i, j] == M[j, i]`` holds
bitwise.

Vectorization order
-------------------
``vech`` stacks the lower-triangular entries (diagonal included) column by
column: column j contributes rows j..p-1.  ``vech_star`` does the same but
skips the diagonal.  Any fixed order gives the same Euclidean cosine; fixing
it makes outputs bit-reproducible.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import DataError, DegenerateStatisticError

__all__ = [
    "Mapping",
    "CorrelationMethod",
    "symmetrize",
    "vech",
    "vech_star",
    "unvech",
    "sample_covariance",
    "sample_correlation",
    "generalized_cosine",
    "modified_hilbert",
]

# Relative pivot floor below which a matrix is treated as not positive
# definite for the Cholesky mapping.
CHOLESKY_PIVOT_RTOL = 1e-10


class Mapping(str, Enum):
    """How a symmetric matrix is mapped to a vector (or matrix) before the
    cosine is taken."""

    FROBENIUS = "frobenius"
    CHOLESKY_VECH = "cholesky-vech"
    EIGENVALUE_VECTOR = "eigenvalue-vector"
    HALF_VEC = "half-vec"
    MODIFIED_HALF_VEC = "modified-half-vec"


class CorrelationMethod(str, Enum):
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    KENDALL = "kendall"


def _check_square(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DataError(f"{name} must be a square matrix, got shape {M.shape}")
    if M.shape[0] < 1:
        raise DataError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(M)):
        raise DataError(f"{name} contains non-finite entries")
    return M


def symmetrize(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that ``M`` is (numerically) symmetric and return a copy whose
    upper triangle is an exact mirror of the lower triangle.

    Raises
    ------
    DataError
        If ``M`` is not square, not finite, or visibly asymmetric.
    """
    M = _check_square(M, name)
    scale = max(1.0, float(np.max(np.abs(M))))
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-8 * scale):
        raise DataError(f"{name} is not symmetric")
    out = np.tril(M)
    out = out + out.T - np.diag(np.diag(out))
    return out


@lru_cache(maxsize=64)
def _vech_indices(p: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    # (j, i) of the upper-triangle pairs walks the lower triangle column by
    # column, which is the vech order.
    i, j = np.triu_indices(p, k=k)
    return j, i


def vech(M: np.ndarray) -> np.ndarray:
    """Half-vectorization: lower-triangular entries including the diagonal,
    in column-major order.  Length is p(p+1)/2.

    >>> vech(np.array([[4., 1, 2], [1, 5, 3], [2, 3, 6]]))
    array([4., 1., 2., 5., 3., 6.])
    """
    M = _check_square(M, "matrix")
    j, i = _vech_indices(M.shape[0], 0)
    return M[j, i]


def vech_star(M: np.ndarray) -> np.ndarray:
    """Modified half-vectorization: strictly-below-diagonal entries in
    column-major order.  Length is p(p-1)/2.  Requires p >= 2: for p = 1 the
    vector would be empty and every downstream cosine undefined.
    """
    M = _check_square(M, "matrix")
    if M.shape[0] < 2:
        raise DataError("vech_star requires a matrix of dimension >= 2")
    j, i = _vech_indices(M.shape[0], 1)
    return M[j, i]


def unvech(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vech`: rebuild the symmetric matrix from its
    half-vectorization."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DataError("unvech expects a 1-d vector")
    p = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if p * (p + 1) // 2 != v.size:
        raise DataError(f"vector of length {v.size} is not a valid vech image")
    M = np.zeros((p, p))
    i, j = np.triu_indices(p)
    M[j, i] = v
    M[i, j] = v
    return M


def _check_data(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise DataError(f"data must be a 2-d matrix, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise DataError("data contains non-finite cells")
    return D


def sample_covariance(D: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance (divisor n-1) of an n x p data matrix with
    rows as observations.  The result is exactly symmetric.

    Raises
    ------
    DataError
        If fewer than two rows are available.
    """
    D = _check_data(D)
    if D.shape[0] < 2:
        raise DataError(f"covariance needs at least 2 rows, got {D.shape[0]}")
    S = np.cov(D, rowvar=False, ddof=1)
    S = np.atleast_2d(S)
    return symmetrize(S, "sample covariance")


def _column_ranks(D: np.ndarray) -> np.ndarray:
    out = np.empty_like(D)
    for k in range(D.shape[1]):
        out[:, k] = stats.rankdata(D[:, k], method="average")
    return out


def sample_correlation(
    D: np.ndarray, method: CorrelationMethod = CorrelationMethod.PEARSON
) -> np.ndarray:
    """Sample correlation matrix of an n x p data matrix.

    ``pearson`` is the usual product-moment matrix, ``spearman`` is Pearson
    on average ranks (ties get the mean rank), and ``kendall`` is tau-b
    (tie-corrected).  The result has a unit diagonal, entries in [-1, 1], and
    exact symmetry.

    Raises
    ------
    DataError
        If fewer than two rows are available.
    DegenerateStatisticError
        If some column is constant; the message names the column index.
    """
    D = _check_data(D)
    n, p = D.shape
    if n < 2:
        raise DataError(f"correlation needs at least 2 rows, got {n}")
    constant = np.all(D == D[0], axis=0)
    if np.any(constant):
        raise DegenerateStatisticError(
            f"column {int(np.flatnonzero(constant)[0])} is constant; "
            "correlation is undefined"
        )
    method = CorrelationMethod(method)
    if method is CorrelationMethod.PEARSON:
        R = np.corrcoef(D, rowvar=False)
    elif method is CorrelationMethod.SPEARMAN:
        R = np.corrcoef(_column_ranks(D), rowvar=False)
    else:
        R = np.eye(p)
        for a in range(p):
            for b in range(a + 1, p):
                R[a, b] = R[b, a] = stats.kendalltau(D[:, a], D[:, b]).statistic
    R = np.atleast_2d(R)
    R = np.clip(R, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return symmetrize(R, "sample correlation")


def modified_hilbert(p: int) -> np.ndarray:
    """Modified Hilbert matrix: entry (i, j) is 1/(i+j-1) off the diagonal
    (1-based indices) and 1 on the diagonal."""
    if p < 1:
        raise DataError("dimension must be >= 1")
    i = np.arange(1, p + 1)
    M = 1.0 / (i[:, None] + i[None, :] - 1.0)
    np.fill_diagonal(M, 1.0)
    return M


def _cholesky_lower(M: np.ndarray, name: str) -> np.ndarray:
    """Cholesky factor with an explicit positive-definiteness tolerance:
    fail if any pivot drops below CHOLESKY_PIVOT_RTOL times the largest
    diagonal entry, reporting the smallest pivot seen."""
    floor = CHOLESKY_PIVOT_RTOL * float(np.max(np.diag(M)))
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        L = None
    if L is not None:
        pivots = np.diag(L) ** 2
        if float(np.min(pivots)) >= floor:
            return L
        smallest = float(np.min(pivots))
    else:
        # Factor step by step just to report the pivot that failed.
        p = M.shape[0]
        A = M.copy()
        smallest = np.inf
        for k in range(p):
            pivot = A[k, k] - np.dot(A[k, :k], A[k, :k])
            smallest = min(smallest, float(pivot))
            if pivot <= 0.0:
                break
            A[k, k] = np.sqrt(pivot)
            if k + 1 < p:
                A[k + 1 :, k] = (
                    A[k + 1 :, k] - A[k + 1 :, :k] @ A[k, :k]
                ) / A[k, k]
    raise DegenerateStatisticError(
        f"{name} is not positive definite within tolerance "
        f"(smallest pivot {smallest:.3e}, floor {floor:.3e})"
    )


def _eigenvalues_descending(M: np.ndarray, name: str) -> np.ndarray:
    lam = np.linalg.eigvalsh(M)[::-1]
    if np.allclose(lam, 0.0):
        raise DegenerateStatisticError(f"{name} has no nonzero eigenvalue")
    return lam


def cosine_of_vectors(u: np.ndarray, v: np.ndarray) -> float:
    """Euclidean cosine of two vectors, clipped into [-1, 1].

    Bit-identical images short-circuit to exactly 1.0, so that the cosine of
    a matrix with itself is 1 without floating-point residue.
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DataError(f"vector length mismatch: {u.size} vs {v.size}")
    if np.array_equal(u, v):
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            raise DegenerateStatisticError("cosine of zero vectors is undefined")
        return 1.0
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateStatisticError("cosine with a zero vector is undefined")
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def generalized_cosine(
    M1: np.ndarray, M2: np.ndarray, mapping: Mapping = Mapping.HALF_VEC
) -> float:
    """Cosine between two symmetric matrices under the chosen mapping.

    frobenius
        Trace inner product over Frobenius norms, on the matrices themselves.
    cholesky-vech
        Euclidean cosine of the half-vectorized Cholesky factors; both
        matrices must be positive definite.
    eigenvalue-vector
        Euclidean cosine of the eigenvalue vectors, sorted descending.
    half-vec
        Euclidean cosine of the ``vech`` images.
    modified-half-vec
        Euclidean cosine of the ``vech_star`` images (p >= 2; undefined for
        exactly diagonal matrices, whose image is the zero vector).

    Returns a value in [-1, 1]; 1 means the two images point in the same
    direction.
    """
    M1 = symmetrize(M1, "first matrix")
    M2 = symmetrize(M2, "second matrix")
    if M1.shape != M2.shape:
        raise DataError(f"dimension mismatch: {M1.shape[0]} vs {M2.shape[0]}")
    mapping = Mapping(mapping)
    if mapping is Mapping.FROBENIUS:
        return cosine_of_vectors(M1.ravel(), M2.ravel())
    if mapping is Mapping.CHOLESKY_VECH:
        L1 = _cholesky_lower(M1, "first matrix")
        L2 = _cholesky_lower(M2, "second matrix")
        i, j = np.triu_indices(M1.shape[0])
        return cosine_of_vectors(L1[j, i], L2[j, i])
    if mapping is Mapping.EIGENVALUE_VECTOR:
        return cosine_of_vectors(
            _eigenvalues_descending(M1, "first matrix"),
            _eigenvalues_descending(M2, "second matrix"),
        )
    if mapping is Mapping.HALF_VEC:
        return cosine_of_vectors(vech(M1), vech(M2))
    return cosine_of_vectors(vech_star(M1), vech_star(M2))
