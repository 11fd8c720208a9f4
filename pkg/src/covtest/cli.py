"""Command line interface.

JSON is the sole machine-readable output and goes to stdout; diagnostics and
the aligned text rendering of simulation tables go to stderr.  Exit codes:
0 success, 2 input error, 3 degenerate statistic, 4 internal error.

For a fixed set of input files, flags and seed, the JSON output is
byte-identical regardless of ``--workers``; the only volatile field is the
wall-clock ``duration_seconds`` inside the manifest.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import secrets
import sys
import time
import traceback

import numpy as np

from . import __version__
from .errors import CovtestError, DataError
from .matrices import CorrelationMethod
from .permutation import (
    PermutationConfig,
    TestResult,
    run_compound_symmetry_test,
    run_identity_test,
    run_k_sample_test,
    run_sphericity_test,
    run_two_sample_test,
    run_uncorrelation_test,
)
from .simulate import TableSpec, render_table_text, run_table
from .statistics import MatrixKind

SEED_ENV_VAR = "COVTEST_SEED"

TEST_COMMANDS = (
    "sphericity",
    "identity",
    "compound-symmetry",
    "two-sample",
    "k-sample",
    "uncorrelation",
)


def ingest_csv(
    path: str, has_header: bool = False, drop_incomplete: bool = False
) -> tuple[np.ndarray, list[str] | None, int]:
    """Read a numeric CSV into an n x p matrix.

    Returns (matrix, header names or None, dropped row count).  Rows with a
    non-numeric or empty cell are an error unless ``drop_incomplete`` is set,
    in which case they are removed.  Ragged rows are always an error.
    """
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            raw = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    raw = [row for row in raw if row]  # csv yields [] for blank trailing lines
    if not raw:
        raise DataError(f"{path}: empty file")

    columns: list[str] | None = None
    start = 0
    if has_header:
        columns = [cell.strip() for cell in raw[0]]
        start = 1
        if len(raw) == 1:
            raise DataError(f"{path}: no data rows after the header")

    width = len(raw[start])
    rows: list[list[float]] = []
    dropped = 0
    for line_no, row in enumerate(raw[start:], start=start + 1):
        if len(row) != width:
            raise DataError(
                f"{path}: row {line_no} has {len(row)} cells, expected {width}"
            )
        values = []
        bad: str | None = None
        for col_no, cell in enumerate(row, start=1):
            text = cell.strip()
            try:
                value = float(text)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                bad = f"column {col_no} value {text!r}"
                break
            values.append(value)
        if bad is None:
            rows.append(values)
        elif drop_incomplete:
            dropped += 1
        else:
            raise DataError(f"{path}: row {line_no}, {bad} is not numeric")
    if columns is not None and len(columns) != width:
        raise DataError(
            f"{path}: header has {len(columns)} names but rows have {width} cells"
        )
    if not rows:
        raise DataError(f"{path}: no usable data rows (dropped {dropped})")
    return np.array(rows, dtype=float), columns, dropped


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common_flags(parser: argparse.ArgumentParser, n_inputs: str) -> None:
    if n_inputs == "one":
        parser.add_argument("data", help="CSV file, rows = subjects, columns = variables")
    elif n_inputs == "two":
        parser.add_argument("data", nargs=2, help="two CSV files, one per sample")
    else:
        parser.add_argument("data", nargs="+", help="K >= 2 CSV files, one per sample")
    parser.add_argument(
        "-r", "--permutations", type=int, default=100, metavar="N",
        help="number of permutation replicates (default 100)",
    )
    parser.add_argument("--seed", type=int, default=None, metavar="S",
                        help=f"master seed; falls back to ${SEED_ENV_VAR}, then random")
    parser.add_argument("--workers", type=int, default=1, metavar="W",
                        help="worker threads (does not change results)")
    parser.add_argument("--emit-permuted", action="store_true",
                        help="include the permuted statistics in the JSON result")
    parser.add_argument("--header", action="store_true",
                        help="first CSV line is a header row")
    parser.add_argument("--drop-incomplete", action="store_true",
                        help="drop rows with non-numeric or empty cells")


def _add_kind_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--matrix-kind", choices=["covariance", "correlation"], default="covariance",
        help="test the covariance or the correlation matrix (default covariance)",
    )


def _add_method_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method", choices=["pearson", "spearman", "kendall"], default=None,
        help="correlation estimator; only valid with --matrix-kind correlation",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covtest",
        description="Permutation tests of covariance and correlation matrices.",
    )
    parser.add_argument("--version", action="version", version=f"covtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sphericity", help="is the covariance proportional to the identity?")
    _add_common_flags(p, "one")

    p = sub.add_parser("identity", help="is the covariance/correlation the identity?")
    _add_common_flags(p, "one")
    _add_kind_flag(p)
    _add_method_flag(p)

    p = sub.add_parser("compound-symmetry",
                       help="equal variances and equal covariances?")
    _add_common_flags(p, "one")
    _add_kind_flag(p)

    p = sub.add_parser("two-sample", help="equality of two covariance/correlation matrices")
    _add_common_flags(p, "two")
    _add_kind_flag(p)
    _add_method_flag(p)

    p = sub.add_parser("k-sample", help="equality of K covariance/correlation matrices")
    _add_common_flags(p, "many")
    _add_kind_flag(p)
    _add_method_flag(p)

    p = sub.add_parser("uncorrelation",
                       help="are the column blocks mutually uncorrelated?")
    _add_common_flags(p, "one")
    p.add_argument("--blocks", type=_int_list, required=True, metavar="P1,P2,...",
                   help="ordered column-block sizes, summing to the column count")

    p = sub.add_parser("simulate", help="run a type-I-error / power table")
    p.add_argument("--table", type=int, choices=range(1, 8), metavar="1..7",
                   help="which built-in study design to run")
    p.add_argument("--config", metavar="FILE",
                   help="key=value file; command line flags override it")
    p.add_argument("--replicates", type=int, default=None, metavar="R")
    p.add_argument("-r", "--permutations", type=int, default=None, metavar="N")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--n", action="append", type=_int_list, default=None,
                   metavar="N1,N2,...", help="restrict the sample-size grid")
    p.add_argument("--p", action="append", type=_int_list, default=None,
                   metavar="P1,P2,...", help="restrict the dimension grid")
    p.add_argument("--dist", action="append", default=None, metavar="SPEC",
                   help="distribution label, e.g. 'gamma(4,0.5)' (repeatable)")
    p.add_argument("--mode", action="append", choices=["type1", "power"], default=None,
                   help="run only these modes (repeatable)")

    return parser


def _resolve_seed(flag_seed: int | None) -> tuple[int, str]:
    if flag_seed is not None:
        if not 0 <= flag_seed < 2**64:
            raise DataError("--seed must be an unsigned 64-bit integer")
        return flag_seed, "flag"
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise DataError(f"${SEED_ENV_VAR}={env!r} is not an integer") from None
        if not 0 <= seed < 2**64:
            raise DataError(f"${SEED_ENV_VAR} must be an unsigned 64-bit integer")
        return seed, "env"
    return secrets.randbits(64), "generated"


def _resolve_method(args: argparse.Namespace) -> CorrelationMethod:
    kind = MatrixKind(args.matrix_kind)
    method = getattr(args, "method", None)
    if method is not None and kind is not MatrixKind.CORRELATION:
        raise DataError("--method is only valid with --matrix-kind correlation")
    return CorrelationMethod(method) if method else CorrelationMethod.PEARSON

def _warn_low_r(r: int) -> None:
    if r < 19:  # 1/alpha - 1 at the conventional alpha = 0.05
        print(
            f"warning: r={r} permutations cannot resolve p-values below "
            f"{1 / (r + 1):.3f}; use at least 19 for alpha = 0.05",
            file=sys.stderr,
        )


def _load_inputs(paths: list[str], args: argparse.Namespace):
    matrices = []
    columns = []
    dropped = []
    for path in paths:
        matrix, cols, n_dropped = ingest_csv(path, args.header, args.drop_incomplete)
        matrices.append(matrix)
        columns.append(cols)
        dropped.append(n_dropped)
        if n_dropped:
            print(f"note: dropped {n_dropped} incomplete row(s) from {path}",
                  file=sys.stderr)
    return matrices, columns, dropped


def _manifest(
    command: str,
    inputs: list[str],
    flags: dict,
    seed: int,
    seed_source: str,
    columns,
    dropped,
    started: float,
) -> dict:
    manifest = {
        "command": command,
        "inputs": list(inputs),
        "flags": flags,
        "seed": seed,
        "seed_source": seed_source,
        "version": __version__,
        "duration_seconds": round(time.monotonic() - started, 3),
    }
    if columns is not None:
        manifest["columns"] = columns
    if dropped is not None:
        manifest["dropped_rows"] = dropped
    return manifest


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _run_test_command(args: argparse.Namespace) -> int:
    started = time.monotonic()
    command = args.command
    seed, seed_source = _resolve_seed(args.seed)
    _warn_low_r(args.permutations)
    cfg = PermutationConfig(
        permutations=args.permutations,
        seed=seed,
        workers=args.workers,
        keep_permuted=args.emit_permuted,
    )
    paths = args.data if isinstance(args.data, list) else [args.data]
    flags: dict = {
        "permutations": args.permutations,
        "emit_permuted": args.emit_permuted,
        "header": args.header,
        "drop_incomplete": args.drop_incomplete,
    }

    if command == "identity":
        kind = MatrixKind(args.matrix_kind)
        method = _resolve_method(args)
        flags["matrix_kind"] = kind.value
        flags["method"] = method.value
    elif command == "compound-symmetry":
        kind = MatrixKind(args.matrix_kind)
        flags["matrix_kind"] = kind.value
    elif command in ("two-sample", "k-sample"):
        kind = MatrixKind(args.matrix_kind)
        method = _resolve_method(args)
        flags["matrix_kind"] = kind.value
        flags["method"] = method.value
        if command == "k-sample" and len(paths) < 2:
            raise DataError(f"k-sample needs at least 2 CSV files, got {len(paths)}")
    elif command == "uncorrelation":
        flags["blocks"] = args.blocks

    matrices, columns, dropped = _load_inputs(paths, args)

    if command == "sphericity":
        result = run_sphericity_test(matrices[0], cfg)
    elif command == "identity":
        result = run_identity_test(matrices[0], kind, method, cfg)
    elif command == "compound-symmetry":
        result = run_compound_symmetry_test(matrices[0], kind, cfg)
    elif command == "two-sample":
        result = run_two_sample_test(matrices[0], matrices[1], kind, method, cfg)
    elif command == "k-sample":
        result = run_k_sample_test(matrices, kind, method, cfg)
    else:
        result = run_uncorrelation_test(matrices[0], args.blocks, cfg)

    payload = _result_payload(result)
    payload["manifest"] = _manifest(
        command, paths, flags, seed, seed_source,
        columns if args.header else None,
        dropped if args.drop_incomplete else None,
        started,
    )
    _emit(payload)
    return 0


def _result_payload(result: TestResult) -> dict:
    payload = {
        "statistic": result.statistic.value,
        "statistic_kind": result.statistic.kind,
        "p_value": result.p_value,
        "exceed_count": result.exceed_count,
        "r": result.r,
    }
    if result.permuted is not None:
        payload["permuted"] = list(result.permuted)
    return payload


def _parse_config_file(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if "=" not in text:
                    raise DataError(f"{path}: line {line_no} is not key=value: {text!r}")
                key, _, value = text.partition("=")
                out.setdefault(key.strip().lower(), []).append(value.strip())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return out


def _config_scalar(config: dict, key: str, cast, flag_value):
    if flag_value is not None:
        return flag_value
    if key in config:
        if len(config[key]) > 1:
            raise DataError(f"config key {key!r} given more than once")
        try:
            return cast(config[key][0])
        except ValueError:
            raise DataError(f"config key {key!r} has invalid value {config[key][0]!r}") from None
    return None


def _config_list(config: dict, key: str, flag_value, cast=str) -> tuple:
    if flag_value is not None:
        if cast is int:  # --n/--p arrive as lists of int lists
            return tuple(x for chunk in flag_value for x in chunk)
        return tuple(flag_value)
    values = config.get(key, [])
    try:
        return tuple(cast(v) for v in values)
    except ValueError:
        raise DataError(f"config key {key!r} has a non-{cast.__name__} value") from None


def _run_simulate(args: argparse.Namespace) -> int:
    started = time.monotonic()
    config = _parse_config_file(args.config) if args.config else {}
    table = _config_scalar(config, "table", int, args.table)
    if table is None:
        raise DataError("simulate needs --table (or table= in the config file)")
    seed_flag = _config_scalar(config, "seed", int, args.seed)
    seed, seed_source = _resolve_seed(seed_flag)
    spec = TableSpec(
        table=table,
        replicates=_config_scalar(config, "replicates", int, args.replicates) or 2000,
        permutations=_config_scalar(config, "permutations", int, args.permutations) or 100,
        alpha=_config_scalar(config, "alpha", float, args.alpha) or 0.05,
        seed=seed,
        workers=_config_scalar(config, "workers", int, args.workers) or 1,
        ns=_config_list(config, "n", args.n, int),
        ps=_config_list(config, "p", args.p, int),
        distributions=_config_list(config, "dist", args.dist),
        modes=_config_list(config, "mode", args.mode),
    )
    _warn_low_r(spec.permutations)
    payload = run_table(spec)
    print(render_table_text(payload), file=sys.stderr)
    flags = {
        "table": spec.table,
        "replicates": spec.replicates,
        "permutations": spec.permutations,
        "alpha": spec.alpha,
        "n": list(spec.ns),
        "p": list(spec.ps),
        "dist": list(spec.distributions),
        "mode": list(spec.modes),
        "config": args.config,
    }
    payload["manifest"] = _manifest(
        "simulate", [args.config] if args.config else [], flags,
        seed, seed_source, None, None, started,
    )
    _emit(payload)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _run_simulate(args)
        return _run_test_command(args)
    except CovtestError as exc:
        print(f"covtest {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:  # noqa: BLE001 - anything else is a bug: exit code 4
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
