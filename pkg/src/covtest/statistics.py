"""Closed-form test statistics.

Every statistic is one minus a cosine, so values live in [0, 2]; the
one-sample statistics (sphericity, identity, compound symmetry,
uncorrelation) compare against targets with nonnegative entries, which pins
them into [0, 1].  A statistic of 0 means the sample matrix has exactly the
null structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError, DegenerateStatisticError
from .matrices import cosine_of_vectors, symmetrize, vech, vech_star

__all__ = [
    "MatrixKind",
    "StatisticValue",
    "sphericity_statistic",
    "identity_correlation_statistic",
    "compound_symmetry_statistic",
    "two_sample_statistic",
    "k_sample_statistic",
    "uncorrelation_statistic",
]


class MatrixKind(str, Enum):
    COVARIANCE = "covariance"
    CORRELATION = "correlation"


@dataclass(frozen=True)
class StatisticValue:
    """A test-statistic value together with the identity of the formula that
    produced it."""

    value: float
    kind: str


def sphericity_statistic(S: np.ndarray) -> StatisticValue:
    """Sphericity statistic 1 - tr(S) / (sqrt(p) * ||vech(S)||).

    The unknown scale cancels, so this is also the statistic for testing a
    covariance matrix against the identity.  Undefined for an all-zero
    matrix.
    """
    S = symmetrize(S, "covariance matrix")
    norm = float(np.linalg.norm(vech(S)))
    if norm == 0.0:
        raise DegenerateStatisticError("all-zero matrix: sphericity undefined")
    p = S.shape[0]
    cos = float(np.trace(S)) / (np.sqrt(p) * norm)
    return StatisticValue(1.0 - float(np.clip(cos, -1.0, 1.0)), "sphericity")


def identity_correlation_statistic(S: np.ndarray) -> StatisticValue:
    """Identity statistic 1 - sqrt(p) / ||vech(S)|| for a correlation matrix.

    Requires a unit diagonal (tolerance 1e-9); pass covariance matrices to
    :func:`sphericity_statistic` instead.
    """
    S = symmetrize(S, "correlation matrix")
    if np.max(np.abs(np.diag(S) - 1.0)) > 1e-9:
        raise DataError("matrix does not have a unit diagonal; not a correlation matrix")
    p = S.shape[0]
    cos = np.sqrt(p) / float(np.linalg.norm(vech(S)))
    return StatisticValue(1.0 - float(np.clip(cos, -1.0, 1.0)), "identity-correlation")


def compound_symmetry_statistic(S: np.ndarray) -> StatisticValue:
    """Compound-symmetry statistic
    1 - sum of below-diagonal entries / (sqrt(p(p-1)/2) * ||vech*(S)||).

    The same formula serves covariance and correlation input; the intra-class
    correlation and the scale both cancel.  Undefined when all off-diagonal
    entries are zero.
    """
    S = symmetrize(S, "matrix")
    if S.shape[0] < 2:
        raise DataError("compound symmetry needs dimension >= 2")
    off = vech_star(S)
    norm = float(np.linalg.norm(off))
    if norm == 0.0:
        raise DegenerateStatisticError(
            "all off-diagonal entries are zero: compound-symmetry statistic undefined"
        )
    p = S.shape[0]
    cos = float(np.sum(off)) / (np.sqrt(0.5 * p * (p - 1)) * norm)
    return StatisticValue(1.0 - float(np.clip(cos, -1.0, 1.0)), "compound-symmetry")


def _pair_value(S1: np.ndarray, S2: np.ndarray, kind: MatrixKind) -> float:
    if kind is MatrixKind.COVARIANCE:
        u, v = vech(S1), vech(S2)
    else:
        u, v = vech_star(S1), vech_star(S2)
    try:
        cos = cosine_of_vectors(u, v)
    except DegenerateStatisticError:
        raise DegenerateStatisticError(
            "a sample matrix maps to the zero vector; the two-sample "
            f"{kind.value} statistic is undefined"
        ) from None
    return 1.0 - cos


def two_sample_statistic(
    S1: np.ndarray, S2: np.ndarray, kind: MatrixKind = MatrixKind.COVARIANCE
) -> StatisticValue:
    """Equality statistic 1 - cos(S1, S2): covariance matrices are compared
    through ``vech``, correlation matrices through ``vech_star``."""
    kind = MatrixKind(kind)
    S1 = symmetrize(S1, "first matrix")
    S2 = symmetrize(S2, "second matrix")
    if S1.shape != S2.shape:
        raise DataError(f"dimension mismatch: {S1.shape[0]} vs {S2.shape[0]}")
    return StatisticValue(_pair_value(S1, S2, kind), f"two-sample-{kind.value}")


def k_sample_statistic(
    matrices: list[np.ndarray], kind: MatrixKind = MatrixKind.COVARIANCE
) -> StatisticValue:
    """Max over all unordered pairs of the two-sample statistic."""
    kind = MatrixKind(kind)
    if len(matrices) < 2:
        raise DataError(f"need at least 2 matrices, got {len(matrices)}")
    mats = [symmetrize(S, f"matrix {i}") for i, S in enumerate(matrices)]
    dims = {S.shape[0] for S in mats}
    if len(dims) != 1:
        raise DataError(f"matrices have mixed dimensions: {sorted(dims)}")
    worst = max(
        _pair_value(mats[a], mats[b], kind)
        for a in range(len(mats))
        for b in range(a + 1, len(mats))
    )
    return StatisticValue(worst, f"k-sample-{kind.value}")


# ---------------------------------------------------------------------------
# Fast kernels for the permutation loops.
#
# For a symmetric S the vech norms and inner products reduce to whole-matrix
# expressions: sum_{i<=j} a_ij b_ij = (sum_ij a_ij b_ij + sum_i a_ii b_ii) / 2,
# and likewise without the diagonal term for vech_star.  These run in O(p^2)
# vectorized passes with no index bookkeeping, which matters when a statistic
# is evaluated r times per test.  Values agree with the public functions to
# floating-point roundoff; each engine run uses one kernel for both observed
# and permuted statistics, so tie comparisons stay exact.
# ---------------------------------------------------------------------------


def _vech_dot(A: np.ndarray, B: np.ndarray) -> float:
    return 0.5 * (float(np.vdot(A, B)) + float(np.dot(np.diag(A), np.diag(B))))


def _vech_star_dot(A: np.ndarray, B: np.ndarray) -> float:
    return 0.5 * (float(np.vdot(A, B)) - float(np.dot(np.diag(A), np.diag(B))))


def sphericity_value(S: np.ndarray) -> float:
    norm_sq = _vech_dot(S, S)
    if norm_sq == 0.0:
        raise DegenerateStatisticError("all-zero matrix: sphericity undefined")
    cos = float(np.trace(S)) / np.sqrt(S.shape[0] * norm_sq)
    return 1.0 - float(np.clip(cos, -1.0, 1.0))


def identity_correlation_value(S: np.ndarray) -> float:
    cos = np.sqrt(S.shape[0] / _vech_dot(S, S))
    return 1.0 - float(np.clip(cos, -1.0, 1.0))


def compound_symmetry_value(S: np.ndarray) -> float:
    p = S.shape[0]
    norm_sq = _vech_star_dot(S, S)
    if norm_sq == 0.0:
        raise DegenerateStatisticError(
            "all off-diagonal entries are zero: compound-symmetry statistic undefined"
        )
    total = 0.5 * (float(np.sum(S)) - float(np.trace(S)))
    cos = total / np.sqrt(0.5 * p * (p - 1) * norm_sq)
    return 1.0 - float(np.clip(cos, -1.0, 1.0))


def pair_value(S1: np.ndarray, S2: np.ndarray, kind: "MatrixKind") -> float:
    dot = _vech_dot if kind is MatrixKind.COVARIANCE else _vech_star_dot
    n1, n2 = dot(S1, S1), dot(S2, S2)
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateStatisticError(
            "a sample matrix maps to the zero vector; the two-sample "
            f"{kind.value} statistic is undefined"
        )
    if np.array_equal(S1, S2):
        return 0.0
    cos = dot(S1, S2) / np.sqrt(n1 * n2)
    return 1.0 - float(np.clip(cos, -1.0, 1.0))


def max_pair_value(matrices: list[np.ndarray], kind: "MatrixKind") -> float:
    return max(
        pair_value(matrices[a], matrices[b], kind)
        for a in range(len(matrices))
        for b in range(a + 1, len(matrices))
    )


def uncorrelation_value(S: np.ndarray, blocks: list[int]) -> float:
    norm_sq = _vech_dot(S, S)
    if norm_sq == 0.0:
        raise DegenerateStatisticError(
            "all-zero matrix: uncorrelation statistic undefined"
        )
    inner = 0.0
    start = 0
    for b in blocks:
        sub = S[start : start + b, start : start + b]
        inner += 0.5 * (float(np.sum(sub)) + float(np.trace(sub)))
        start += b
    const_sq = 0.5 * sum(b * (b + 1) for b in blocks)
    cos = inner / np.sqrt(const_sq * norm_sq)
    return 1.0 - float(np.clip(cos, -1.0, 1.0))


def _check_blocks(blocks: list[int], p: int) -> list[int]:
    blocks = [int(b) for b in blocks]
    if not blocks or any(b < 1 for b in blocks):
        raise DataError(f"block sizes must be positive integers, got {blocks}")
    if sum(blocks) != p:
        raise DataError(f"block sizes {blocks} do not sum to dimension {p}")
    return blocks


def uncorrelation_statistic(S: np.ndarray, blocks: list[int]) -> StatisticValue:
    """Statistic for testing that the sub-vectors defined by ``blocks`` are
    uncorrelated: 1 - cosine between vech(S) and the vech of the
    block-diagonal matrix of all-ones blocks."""
    S = symmetrize(S, "covariance matrix")
    p = S.shape[0]
    blocks = _check_blocks(blocks, p)
    norm = float(np.linalg.norm(vech(S)))
    if norm == 0.0:
        raise DegenerateStatisticError("all-zero matrix: uncorrelation statistic undefined")
    # vech of diag(J_p1, ..., J_pk) is an indicator, so the inner product is
    # the sum of S's lower-triangular entries inside the diagonal blocks.
    inner = 0.0
    start = 0
    for b in blocks:
        sub = S[start : start + b, start : start + b]
        inner += 0.5 * (float(np.sum(sub)) + float(np.trace(sub)))
        start += b
    const = np.sqrt(0.5 * sum(b * (b + 1) for b in blocks))
    cos = inner / (const * norm)
    return StatisticValue(1.0 - float(np.clip(cos, -1.0, 1.0)), "uncorrelation")
