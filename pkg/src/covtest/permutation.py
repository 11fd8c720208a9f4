"""Seeded, parallelizable permutation algorithms and the Monte-Carlo p-value.

Every replicate draws its randomness from a generator derived solely from
``(master seed, replicate index)``, never from scheduling order, so results
are bit-identical for any worker count.  Replicates are farmed out to a
thread pool in contiguous index chunks and written into slots addressed by
replicate index.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, FeasibilityWarning
from .matrices import CorrelationMethod, sample_correlation, sample_covariance
from .statistics import (
    MatrixKind,
    StatisticValue,
    _check_blocks,
    compound_symmetry_value,
    identity_correlation_value,
    max_pair_value,
    sphericity_value,
    two_sample_statistic,
    uncorrelation_value,
)

__all__ = [
    "PermutationConfig",
    "TestResult",
    "mc_p_value",
    "run_sphericity_test",
    "run_identity_test",
    "run_compound_symmetry_test",
    "run_two_sample_test",
    "run_k_sample_test",
    "run_uncorrelation_test",
    "enumerate_two_sample_p",
    "shuffle_within_rows",
    "shuffle_within_columns",
    "shuffle_rows",
    "shuffle_grouped_columns",
]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class PermutationConfig:
    """Settings for a permutation run.

    permutations
        Number of permutation replicates r.  At significance level alpha,
        at least 1/alpha - 1 replicates are recommended (100 at 0.05).
    seed
        Master seed (64-bit unsigned).  Replicate i derives its stream from
        (seed, i).
    workers
        Thread count; has no effect on results.
    keep_permuted
        Retain the r permuted statistic values on the result.
    """

    permutations: int = 100
    seed: int = 0
    workers: int = 1
    keep_permuted: bool = False

    def __post_init__(self) -> None:
        if self.permutations < 1:
            raise DataError(f"permutations must be >= 1, got {self.permutations}")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise DataError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise DataError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class TestResult:
    """Outcome of one permutation test."""

    statistic: StatisticValue
    p_value: float
    r: int
    exceed_count: int
    permuted: tuple[float, ...] | None = None


def mc_p_value(observed: StatisticValue | float, permuted: Sequence) -> float:
    """Monte-Carlo p-value (#(T_i >= T_o) + 1) / (r + 1); ties count as
    exceedances."""
    if len(permuted) == 0:
        raise DataError("need at least one permuted statistic")
    t_o = observed.value if isinstance(observed, StatisticValue) else float(observed)
    values = np.array(
        [t.value if isinstance(t, StatisticValue) else float(t) for t in permuted]
    )
    exceed = int(np.count_nonzero(values >= t_o))
    return (exceed + 1) / (len(values) + 1)


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def shuffle_within_rows(D: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independently permute the entries of each row."""
    return rng.permuted(D, axis=1)


def shuffle_within_columns(D: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independently permute the entries of each column."""
    return rng.permuted(D, axis=0)


def shuffle_rows(D: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle whole rows."""
    return D[rng.permutation(D.shape[0])]


def shuffle_grouped_columns(
    D: np.ndarray, blocks: Sequence[int], rng: np.random.Generator
) -> np.ndarray:
    """For each column block, draw one row permutation and apply it jointly to
    every column of that block.  Within-block covariance is preserved exactly;
    covariance across blocks is destroyed."""
    out = np.empty_like(D)
    start = 0
    for b in blocks:
        perm = rng.permutation(D.shape[0])
        out[:, start : start + b] = D[perm, start : start + b]
        start += b
    return out


def _execute(
    observed: StatisticValue,
    replicate: Callable[[np.random.Generator], float],
    cfg: PermutationConfig,
) -> TestResult:
    r = cfg.permutations
    values = np.empty(r, dtype=float)

    def fill(indices: np.ndarray) -> None:
        for i in indices:
            values[i] = replicate(_replicate_rng(cfg.seed, int(i)))

    if cfg.workers == 1 or r == 1:
        fill(np.arange(r))
    else:
        chunks = np.array_split(np.arange(r), cfg.workers)
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for future in [pool.submit(fill, c) for c in chunks if c.size]:
                future.result()

    exceed = int(np.count_nonzero(values >= observed.value))
    return TestResult(
        statistic=observed,
        p_value=(exceed + 1) / (r + 1),
        r=r,
        exceed_count=exceed,
        permuted=tuple(values.tolist()) if cfg.keep_permuted else None,
    )


def _as_data(D: np.ndarray, name: str = "data") -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise DataError(f"{name} must be a 2-d matrix, got shape {D.shape}")
    if D.shape[0] < 2:
        raise DataError(f"{name} needs at least 2 rows, got {D.shape[0]}")
    if not np.all(np.isfinite(D)):
        raise DataError(f"{name} contains non-finite cells")
    return D


def _sample_matrix(
    D: np.ndarray, kind: MatrixKind, method: CorrelationMethod
) -> np.ndarray:
    if kind is MatrixKind.COVARIANCE:
        return np.atleast_2d(np.cov(D, rowvar=False, ddof=1))
    return sample_correlation(D, method)


def run_sphericity_test(D: np.ndarray, cfg: PermutationConfig) -> TestResult:
    """Sphericity test: is the covariance matrix proportional to the identity?

    Each replicate permutes within every row of the data, then within every
    column of the result, and recomputes the statistic.  Assumes the columns
    share a common marginal distribution (documented, not checked).
    """
    D = _as_data(D)
    cov = _sample_matrix(D, MatrixKind.COVARIANCE, CorrelationMethod.PEARSON)
    observed = StatisticValue(sphericity_value(cov), "sphericity")

    def replicate(rng: np.random.Generator) -> float:
        permuted = shuffle_within_columns(shuffle_within_rows(D, rng), rng)
        return sphericity_value(np.cov(permuted, rowvar=False, ddof=1))

    return _execute(observed, replicate, cfg)


def run_identity_test(
    D: np.ndarray,
    kind: MatrixKind = MatrixKind.COVARIANCE,
    method: CorrelationMethod = CorrelationMethod.PEARSON,
    cfg: PermutationConfig = PermutationConfig(),
) -> TestResult:
    """Identity test for a covariance or correlation matrix.

    Replicates permute within each column only, which leaves every column's
    variance (and hence the diagonal of the sample covariance) unchanged.
    Columns may have different marginal distributions.
    """
    D = _as_data(D)
    kind = MatrixKind(kind)
    method = CorrelationMethod(method)
    if kind is MatrixKind.COVARIANCE:
        value, label = sphericity_value, "sphericity"
    else:
        value, label = identity_correlation_value, "identity-correlation"
    observed = StatisticValue(value(_sample_matrix(D, kind, method)), label)

    def replicate(rng: np.random.Generator) -> float:
        permuted = shuffle_within_columns(D, rng)
        return value(_sample_matrix(permuted, kind, method))

    return _execute(observed, replicate, cfg)


def run_compound_symmetry_test(
    D: np.ndarray,
    kind: MatrixKind = MatrixKind.COVARIANCE,
    cfg: PermutationConfig = PermutationConfig(),
) -> TestResult:
    """Compound-symmetry test: equal variances and equal covariances.

    Replicates permute within each row only.  Requires a common marginal
    distribution across columns (documented, not checked); correlation kind
    uses the Pearson matrix.
    """
    D = _as_data(D)
    kind = MatrixKind(kind)
    matrix = _sample_matrix(D, kind, CorrelationMethod.PEARSON)
    observed = StatisticValue(compound_symmetry_value(matrix), "compound-symmetry")

    def replicate(rng: np.random.Generator) -> float:
        permuted = shuffle_within_rows(D, rng)
        return compound_symmetry_value(
            _sample_matrix(permuted, kind, CorrelationMethod.PEARSON)
        )

    return _execute(observed, replicate, cfg)


def _check_stackable(datasets: Sequence[np.ndarray]) -> list[np.ndarray]:
    mats = [_as_data(D, f"sample {i + 1}") for i, D in enumerate(datasets)]
    widths = {D.shape[1] for D in mats}
    if len(widths) != 1:
        raise DataError(f"samples have mixed column counts: {sorted(widths)}")
    return mats


def _warn_if_few_splits(sizes: list[int], r: int) -> None:
    n = sum(sizes)
    smallest = min(sizes)
    if comb(n, smallest) < r:
        warnings.warn(
            f"only C({n},{smallest}) = {comb(n, smallest)} splits are available "
            f"for r = {r} permutations; replicates sample with replacement",
            FeasibilityWarning,
            stacklevel=3,
        )


def _run_stacked(
    datasets: Sequence[np.ndarray],
    kind: MatrixKind,
    method: CorrelationMethod,
    cfg: PermutationConfig,
    label: str,
) -> TestResult:
    mats = _check_stackable(datasets)
    kind = MatrixKind(kind)
    method = CorrelationMethod(method)
    sizes = [D.shape[0] for D in mats]
    _warn_if_few_splits(sizes, cfg.permutations)
    stacked = np.vstack(mats)
    bounds = np.cumsum([0] + sizes)

    def statistic(data: np.ndarray) -> float:
        samples = [
            _sample_matrix(data[bounds[i] : bounds[i + 1]], kind, method)
            for i in range(len(sizes))
        ]
        return max_pair_value(samples, kind)

    observed = StatisticValue(statistic(stacked), f"{label}-{kind.value}")

    def replicate(rng: np.random.Generator) -> float:
        return statistic(shuffle_rows(stacked, rng))

    return _execute(observed, replicate, cfg)


def run_two_sample_test(
    D1: np.ndarray,
    D2: np.ndarray,
    kind: MatrixKind = MatrixKind.COVARIANCE,
    method: CorrelationMethod = CorrelationMethod.PEARSON,
    cfg: PermutationConfig = PermutationConfig(),
) -> TestResult:
    """Equality test for two covariance or correlation matrices.

    Each replicate shuffles the rows of the stacked (n1+n2) x p matrix,
    splits it back into the original sample sizes, and recomputes.  Assumes
    each column has the same distribution in both samples.
    """
    return _run_stacked([D1, D2], kind, method, cfg, "two-sample")


def run_k_sample_test(
    datasets: Sequence[np.ndarray],
    kind: MatrixKind = MatrixKind.COVARIANCE,
    method: CorrelationMethod = CorrelationMethod.PEARSON,
    cfg: PermutationConfig = PermutationConfig(),
) -> TestResult:
    """Equality test for K covariance or correlation matrices (max over all
    pairwise two-sample statistics).  Replicates shuffle the stacked rows and
    re-slice sequentially into the original sample sizes."""
    if len(datasets) < 2:
        raise DataError(f"need at least 2 samples, got {len(datasets)}")
    return _run_stacked(datasets, kind, method, cfg, "k-sample")


def run_uncorrelation_test(
    D: np.ndarray, blocks: Sequence[int], cfg: PermutationConfig = PermutationConfig()
) -> TestResult:
    """Test that the column blocks are mutually uncorrelated.

    Each replicate draws one row permutation per block and applies it jointly
    to that block's columns, preserving every within-block sample covariance
    exactly while breaking covariance across blocks.
    """
    D = _as_data(D)
    blocks = _check_blocks(list(blocks), D.shape[1])
    cov = _sample_matrix(D, MatrixKind.COVARIANCE, CorrelationMethod.PEARSON)
    observed = StatisticValue(uncorrelation_value(cov, blocks), "uncorrelation")

    def replicate(rng: np.random.Generator) -> float:
        permuted = shuffle_grouped_columns(D, blocks, rng)
        return uncorrelation_value(
            np.cov(permuted, rowvar=False, ddof=1), blocks
        )

    return _execute(observed, replicate, cfg)


def enumerate_two_sample_p(
    D1: np.ndarray,
    D2: np.ndarray,
    kind: MatrixKind = MatrixKind.COVARIANCE,
    method: CorrelationMethod = CorrelationMethod.PEARSON,
) -> float:
    """Exact two-sample permutation p-value by full enumeration of all
    C(n1+n2, n1) splits of the stacked rows (the observed split included).

    An oracle for small samples, not an engine: the split count grows
    combinatorially.
    """
    mats = _check_stackable([D1, D2])
    kind = MatrixKind(kind)
    method = CorrelationMethod(method)
    n1 = mats[0].shape[0]
    stacked = np.vstack(mats)
    n = stacked.shape[0]

    def matrix(rows: np.ndarray) -> np.ndarray:
        if kind is MatrixKind.COVARIANCE:
            return sample_covariance(rows)
        return sample_correlation(rows, method)

    def value(first_rows: tuple[int, ...]) -> float:
        mask = np.zeros(n, dtype=bool)
        mask[list(first_rows)] = True
        return two_sample_statistic(matrix(stacked[mask]), matrix(stacked[~mask]), kind).value

    observed = value(tuple(range(n1)))
    total = 0
    exceed = 0
    for first_rows in itertools.combinations(range(n), n1):
        total += 1
        if value(first_rows) >= observed:
            exceed += 1
    return exceed / total
