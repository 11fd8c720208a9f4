"""Simulation harness: empirical type-I-error and power grids.

Seven built-in table layouts cover the study designs this package is
validated against: sphericity null and two alternatives (tables 1-3),
identity testing under a block-diagonal model (table 4), two-sample equality
under the same model (table 5), moving-average models probing the
equal-distribution assumption (table 6), and sparse covariance differences
with SSNR bookkeeping (table 7).  Defaults run at full scale (2000
replicates, 100 permutations, alpha 0.05); every field is overridable down to
desk scale.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import datagen
from .datagen import (
    BlockDiagonalModel,
    CovarianceModel,
    Distribution,
    LinearMapModel,
    MovingAverageModel,
)
from .errors import DataError
from .permutation import (
    PermutationConfig,
    run_identity_test,
    run_sphericity_test,
    run_two_sample_test,
)
from .statistics import MatrixKind

__all__ = ["TableSpec", "Cell", "run_table", "render_table_text", "TABLE_SUMMARIES"]

TABLE_SUMMARIES = {
    1: "sphericity test, type I error (independent columns)",
    2: "sphericity test, power against a diagonal variance spike",
    3: "sphericity test, power against a compound-symmetry shift",
    4: "identity test, type I error and power (block-diagonal model)",
    5: "two-sample equality test (block-diagonal model)",
    6: "two-sample equality test (moving-average models, assumption checks)",
    7: "two-sample equality test (sparse covariance differences, SSNR)",
}

_GAMMA_A = Distribution("gamma", (4, 0.5))
_GAMMA_B = Distribution("gamma", (0.5, math.sqrt(2)))
_SPHERICITY_DISTS = ("normal(0,1)", str(_GAMMA_A))
_BLOCK_DISTS = ("normal(0,1)", "lognormal(0,1)", "student-t(5)", "gumbel(10,2)", "hybrid")
_SPARSE_DISTS = (
    "normal(0,1)",
    "normal(2,1)",
    "normal(4,1)",
    "gamma(5,1)",
    "gamma(10,1)",
    "poisson(5)",
    "poisson(10)",
    "lognormal(0,0.4)",
    "lognormal(0,0.3)",
)

_SPHERICITY_NS = (20, 40, 60, 80)
_SPHERICITY_PS = (38, 55, 89, 159, 181, 331, 343, 642)
_WIDE_GRID = ((100, (24, 32, 64, 76, 92)), (4, (100, 200, 300, 500, 700, 1000)))
_TWO_SAMPLE_GRID = ((100, (24, 32, 64, 76, 92)), (20, (100, 200, 300, 500, 700, 1000)))
_MA_PS = (50, 100, 200, 300, 600, 800)
_SPARSE_PS = (50, 100, 200, 400, 800)
_MA_PAIRS = (
    (str(_GAMMA_A), str(_GAMMA_B)),
    (str(_GAMMA_B), str(_GAMMA_B)),
    (str(_GAMMA_A), str(_GAMMA_A)),
)


@dataclass(frozen=True)
class Cell:
    """One grid cell: a mode (type1 or power), a distribution label, sample
    sizes, and a dimension."""

    mode: str
    distribution: str
    ns: tuple[int, ...]
    p: int


@dataclass(frozen=True)
class TableSpec:
    """Which table to run and at what scale.  ``ns``, ``ps``, ``distributions``
    and ``modes`` default to the table's built-in grid when empty."""

    table: int
    replicates: int = 2000
    permutations: int = 100
    alpha: float = 0.05
    seed: int = 0
    workers: int = 1
    ns: tuple[int, ...] = ()
    ps: tuple[int, ...] = ()
    distributions: tuple[str, ...] = ()
    modes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.table not in TABLE_SUMMARIES:
            raise DataError(f"table must be 1..7, got {self.table}")
        if self.replicates < 1:
            raise DataError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha must be in (0, 1), got {self.alpha}")
        for mode in self.modes:
            if mode not in ("type1", "power"):
                raise DataError(f"mode must be 'type1' or 'power', got {mode!r}")


def _dist(label: str) -> Distribution:
    return Distribution.parse(label)


def _block_model(label: str, q: int, rho: float) -> BlockDiagonalModel:
    if label == "hybrid":
        return BlockDiagonalModel.hybrid(q, rho)
    return BlockDiagonalModel.uniform(q, rho, _dist(label))


def _pair_label(first: str, second: str) -> str:
    return f"{first} | {second}"


def _split_pair(label: str) -> tuple[str, str]:
    parts = [part.strip() for part in label.split("|")]
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) != 2:
        raise DataError(f"cannot parse sample-pair label {label!r}")
    return parts[0], parts[1]


def _wants(spec: TableSpec, mode: str) -> bool:
    return not spec.modes or mode in spec.modes


def _grid(spec: TableSpec, default_ns, default_ps) -> list[tuple[int, int]]:
    ns = spec.ns or default_ns
    ps = spec.ps or default_ps
    return [(n, p) for n in ns for p in ps]


def _paired_grid(spec: TableSpec, default_pairs) -> list[tuple[int, int]]:
    if spec.ns or spec.ps:
        ns = spec.ns or tuple(sorted({n for n, _ in _flatten(default_pairs)}))
        ps = spec.ps or tuple(sorted({p for _, p in _flatten(default_pairs)}))
        return [(n, p) for n in ns for p in ps]
    return _flatten(default_pairs)


def _flatten(regimes) -> list[tuple[int, int]]:
    return [(n, p) for n, plist in regimes for p in plist]


def _cells(spec: TableSpec) -> list[Cell]:
    table = spec.table
    if table == 1:
        dists = spec.distributions or _SPHERICITY_DISTS
        return [
            Cell("type1", d, (n,), p)
            for d in dists
            for n, p in _grid(spec, _SPHERICITY_NS, _SPHERICITY_PS)
            if _wants(spec, "type1")
        ]
    if table in (2, 3):
        dists = spec.distributions or _SPHERICITY_DISTS
        return [
            Cell("power", d, (n,), p)
            for d in dists
            for n, p in _grid(spec, _SPHERICITY_NS, _SPHERICITY_PS)
            if _wants(spec, "power")
        ]
    if table == 4 or table == 5:
        dists = spec.distributions or _BLOCK_DISTS
        grid = _TWO_SAMPLE_GRID if table == 5 else _WIDE_GRID
        pairs = _paired_grid(spec, grid)
        cells = []
        for mode in ("type1", "power"):
            if not _wants(spec, mode):
                continue
            for d in dists:
                for n, p in pairs:
                    if p % 4 != 0:
                        raise DataError(f"table {table} needs p divisible by 4, got {p}")
                    ns = (n,) if table == 4 else (n, n)
                    cells.append(Cell(mode, d, ns, p))
        return cells
    if table == 6:
        labels = spec.distributions or [_pair_label(a, b) for a, b in _MA_PAIRS]
        pairs = _paired_grid(spec, ((20, _MA_PS),))
        return [
            Cell(mode, label, (n, n), p)
            for mode in ("type1", "power")
            if _wants(spec, mode)
            for label in labels
            for n, p in pairs
        ]
    labels = spec.distributions or _SPARSE_DISTS
    pairs = _paired_grid(spec, ((30, _SPARSE_PS),))
    return [
        Cell(mode, label, (n, n), p)
        for mode in ("type1", "power")
        if _wants(spec, mode)
        for label in labels
        for n, p in pairs
    ]


def _replicate_fn(spec: TableSpec, cell: Cell) -> Callable:
    """Build the per-replicate closure: (data rng, test seed) -> (reject, ssnr)."""
    table = spec.table
    alpha = spec.alpha

    def config(test_seed: int) -> PermutationConfig:
        return PermutationConfig(permutations=spec.permutations, seed=test_seed)

    if table in (1, 2, 3):
        p = cell.p
        dist = _dist(cell.distribution)
        if table == 1:
            model = LinearMapModel.identity(p, dist)
        elif table == 2:
            _, gamma = datagen.sigma_alternative_diag(p, 0.125, 1.0, 1.0)
            model = LinearMapModel(gamma, dist)
        else:
            _, gamma = datagen.sigma_alternative_cs(p, 0.1, 1.0, 2.0)
            model = LinearMapModel(gamma, dist)
        n = cell.ns[0]

        def replicate(rng: np.random.Generator, test_seed: int):
            data = model.sample(n, rng)
            result = run_sphericity_test(data, config(test_seed))
            return result.p_value <= alpha, None

        return replicate

    if table == 4:
        q = cell.p // 4
        rho = 0.0 if cell.mode == "type1" else 0.15
        model = _block_model(cell.distribution, q, rho)
        n = cell.ns[0]

        def replicate(rng: np.random.Generator, test_seed: int):
            data = model.sample(n, rng)
            result = run_identity_test(
                data, MatrixKind.COVARIANCE, cfg=config(test_seed)
            )
            return result.p_value <= alpha, None

        return replicate

    if table == 5:
        q = cell.p // 4
        rho2 = 0.15 if cell.mode == "type1" else 0.30
        model1 = _block_model(cell.distribution, q, 0.15)
        model2 = _block_model(cell.distribution, q, rho2)
        n1, n2 = cell.ns

        def replicate(rng: np.random.Generator, test_seed: int):
            d1 = model1.sample(n1, rng)
            d2 = model2.sample(n2, rng)
            result = run_two_sample_test(
                d1, d2, MatrixKind.COVARIANCE, cfg=config(test_seed)
            )
            return result.p_value <= alpha, None

        return replicate

    if table == 6:
        first, second = _split_pair(cell.distribution)
        order_second = 2 if cell.mode == "type1" else 3
        model1 = MovingAverageModel(cell.p, 2, _dist(first))
        model2 = MovingAverageModel(cell.p, order_second, _dist(second))
        n1, n2 = cell.ns

        def replicate(rng: np.random.Generator, test_seed: int):
            d1 = model1.sample(n1, rng)
            d2 = model2.sample(n2, rng)
            result = run_two_sample_test(
                d1, d2, MatrixKind.COVARIANCE, cfg=config(test_seed)
            )
            return result.p_value <= alpha, None

        return replicate

    # table 7: sparse covariance pair, redrawn every replicate
    dist = _dist(cell.distribution)
    n1, n2 = cell.ns
    p = cell.p
    power = cell.mode == "power"

    def replicate(rng: np.random.Generator, test_seed: int):
        sigma_null, sigma_alt, _ = datagen.sparse_cai_pair(p, rng)
        model1 = CovarianceModel(sigma_null, dist)
        model2 = CovarianceModel(sigma_alt if power else sigma_null, dist)
        d1 = model1.sample(n1, rng)
        d2 = model2.sample(n2, rng)
        sample_snr = datagen.ssnr(dist.sample(rng, (n1, p)))
        result = run_two_sample_test(
            d1, d2, MatrixKind.COVARIANCE, cfg=config(test_seed)
        )
        return result.p_value <= alpha, sample_snr

    return replicate


def _run_cell(spec: TableSpec, index: int, cell: Cell) -> dict:
    replicate = _replicate_fn(spec, cell)
    rejections = 0
    snrs: list[float] = []
    notes: set[str] = set()

    def one(rep: int):
        data_rng = np.random.default_rng(
            np.random.SeedSequence(spec.seed, spawn_key=(index, rep, 0))
        )
        test_seed = int(
            np.random.SeedSequence(spec.seed, spawn_key=(index, rep, 1)).generate_state(
                1, np.uint64
            )[0]
        )
        return replicate(data_rng, test_seed)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if spec.workers == 1:
                outcomes = [one(rep) for rep in range(spec.replicates)]
            else:
                with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                    outcomes = list(pool.map(one, range(spec.replicates)))
        except Exception as exc:  # noqa: BLE001 - cell failures must not kill the grid
            return {
                "mode": cell.mode,
                "distribution": cell.distribution,
                "n": list(cell.ns),
                "p": cell.p,
                "error": f"{type(exc).__name__}: {exc}",
            }
    for warning in caught:
        notes.add(str(warning.message))

    for rejected, snr in outcomes:
        rejections += bool(rejected)
        if snr is not None:
            snrs.append(snr)
    rate = rejections / spec.replicates
    out = {
        "mode": cell.mode,
        "distribution": cell.distribution,
        "n": list(cell.ns),
        "p": cell.p,
        "replicates": spec.replicates,
        "rejections": rejections,
        "rate_percent": round(100 * rate, 4),
        "se_percent": round(100 * math.sqrt(rate * (1 - rate) / spec.replicates), 4),
    }
    if snrs:
        out["ssnr_mean"] = round(float(np.mean(snrs)), 4)
        out["ssnr_sd"] = round(float(np.std(snrs, ddof=1)), 4) if len(snrs) > 1 else 0.0
    if notes:
        out["warnings"] = sorted(notes)
    return out


def run_table(spec: TableSpec) -> dict:
    """Run every cell of the table and return the table-shaped result."""
    cells = _cells(spec)
    if not cells:
        raise DataError("the requested mode/grid selection produced no cells")
    results = [_run_cell(spec, i, c) for i, c in enumerate(cells)]
    return {
        "table": spec.table,
        "description": TABLE_SUMMARIES[spec.table],
        "replicates": spec.replicates,
        "permutations": spec.permutations,
        "alpha": spec.alpha,
        "cells": results,
    }


def render_table_text(result: dict) -> str:
    """Aligned text rendering of a table result: one row per (mode,
    distribution, n), one column per dimension p."""
    cells = [c for c in result["cells"] if "error" not in c]
    errors = [c for c in result["cells"] if "error" in c]
    ps = sorted({c["p"] for c in cells})
    rows: dict[tuple, dict[int, str]] = {}
    for c in cells:
        key = (c["mode"], c["distribution"], tuple(c["n"]))
        value = f"{c['rate_percent']:.1f}"
        if "ssnr_mean" in c:
            value += f" [snr {c['ssnr_mean']:.1f}]"
        if c.get("warnings"):
            value += "*"
        rows.setdefault(key, {})[c["p"]] = value

    label_width = max(
        [len(_row_label(k)) for k in rows] + [len("rejection % at alpha")]
    )
    col_width = max([len(str(p)) for p in ps] + [10])
    lines = [
        f"table {result['table']}: {result['description']} "
        f"({result['replicates']} replicates, r={result['permutations']}, "
        f"alpha={result['alpha']})",
        " " * label_width
        + "  "
        + "  ".join(f"p={p}".rjust(col_width) for p in ps),
    ]
    for key in sorted(rows):
        cols = rows[key]
        lines.append(
            _row_label(key).ljust(label_width)
            + "  "
            + "  ".join(cols.get(p, "-").rjust(col_width) for p in ps)
        )
    for c in errors:
        lines.append(
            f"cell mode={c['mode']} dist={c['distribution']} n={c['n']} "
            f"p={c['p']}: ERROR {c['error']}"
        )
    return "\n".join(lines)


def _row_label(key: tuple) -> str:
    mode, dist, ns = key
    n_text = "/".join(str(n) for n in ns)
    return f"{mode:5s} n={n_text:>7s}  {dist}"
