"""Command-line entry point: schedule validation, runs, and comparisons.

Exit codes are a stable contract: 0 success, 1 solver anomaly (stationary or
non-finite iterates), 2 malformed flags or config, 3 I/O failure. All
randomness flows from config seeds; CRSQN_LOG={error|warn|info|debug} only
changes logging verbosity, never results.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys

from .data import (
    EmptyFileError,
    MalformedRowError,
    NonBinaryLabelError,
    load_csv,
    standardize,
    synthetic_classification_dataset,
)
from .oracles import InvalidRankError, LogisticOracle, make_rank_deficient_quadratic
from .schedules import PowerLawSchedule, validate_almost_sure, validate_mean
from .solvers import (
    ConfigInvalidError,
    NonFiniteIterateError,
    SolverConfig,
    compare,
    run,
)
from .traceio import write_comparison_csv, write_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ANOMALY = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_SCHEDULE_KEYS = ("gamma0", "delta0", "mu0", "a", "b", "c")
_CONSTANT_KEYS = ("gamma0", "mu", "delta")
_DATASET_KEYS = (
    "path",
    "label_column",
    "max_rows",
    "standardize",
    "has_header",
    "shuffle_seed",
    "add_intercept",
)
_SYNTHETIC_KEYS = ("kind", "n", "rank", "N", "seed", "standardize")
_RUN_KEYS = (
    "algorithm",
    "schedule",
    "constants",
    "rho",
    "iterations",
    "seed",
    "eval_every",
    "safeguard_retries",
    "x0",
    "dataset",
    "synthetic",
    "output",
    "name",
)
_BLOCK_KEYS = (
    "algorithm",
    "schedule",
    "constants",
    "rho",
    "iterations",
    "eval_every",
    "safeguard_retries",
    "x0",
    "name",
)
_COMPARE_KEYS = ("seeds", "runs", "dataset", "synthetic", "output")


class CliConfigError(ValueError):
    """Config document fails schema validation."""


def _check_keys(obj: dict, allowed: tuple, where: str) -> None:
    if not isinstance(obj, dict):
        raise CliConfigError(f"{where} must be an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise CliConfigError(f"unknown keys in {where}: {unknown}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise CliConfigError(f"{where} is missing required key {key!r}")
    return obj[key]


def _load_document(path) -> dict:
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliConfigError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise CliConfigError(f"{path} must hold a JSON object")
    return doc


def _schedule_from(obj: dict, where: str = "schedule") -> PowerLawSchedule:
    _check_keys(obj, _SCHEDULE_KEYS, where)
    for key in _SCHEDULE_KEYS:
        _require(obj, key, where)
    try:
        return PowerLawSchedule(**{k: float(obj[k]) for k in _SCHEDULE_KEYS})
    except (TypeError, ValueError) as exc:
        raise CliConfigError(f"bad {where}: {exc}") from None


def _solver_config(block: dict, where: str, seed: int = 0) -> SolverConfig:
    algorithm = _require(block, "algorithm", where)
    if algorithm not in ("crsqn", "res", "sa"):
        raise CliConfigError(f"{where}: unknown algorithm {algorithm!r}")
    schedule = None
    gamma0 = mu = delta = None
    if algorithm == "crsqn":
        if "constants" in block:
            raise CliConfigError(f"{where}: crsqn takes 'schedule', not 'constants'")
        schedule = _schedule_from(_require(block, "schedule", where), f"{where}.schedule")
    else:
        if "schedule" in block:
            raise CliConfigError(f"{where}: {algorithm} takes 'constants', not 'schedule'")
        constants = _require(block, "constants", where)
        _check_keys(constants, _CONSTANT_KEYS, f"{where}.constants")
        gamma0 = float(_require(constants, "gamma0", f"{where}.constants"))
        if algorithm == "res":
            mu = float(_require(constants, "mu", f"{where}.constants"))
            delta = float(_require(constants, "delta", f"{where}.constants"))
    x0 = block.get("x0")
    try:
        config = SolverConfig(
            algorithm=algorithm,
            schedule=schedule,
            gamma0=gamma0,
            mu=mu,
            delta=delta,
            rho=float(block.get("rho", 0.9)),
            iterations=int(_require(block, "iterations", where)),
            seed=int(block.get("seed", seed)),
            eval_every=int(block.get("eval_every", 100)),
            safeguard_retries=int(block.get("safeguard_retries", 8)),
            x0=None if x0 is None else tuple(float(v) for v in x0),
            name=block.get("name"),
        )
        config.validate()
    except (TypeError, ValueError) as exc:
        raise CliConfigError(f"bad {where}: {exc}") from None
    return config


def _build_oracle(doc: dict):
    """Make the oracle from the dataset/synthetic block of a config document."""
    has_dataset = "dataset" in doc
    has_synthetic = "synthetic" in doc
    if has_dataset == has_synthetic:
        raise CliConfigError("config needs exactly one of 'dataset' or 'synthetic'")
    if has_dataset:
        block = doc["dataset"]
        _check_keys(block, _DATASET_KEYS, "dataset")
        ds = load_csv(
            _require(block, "path", "dataset"),
            _require(block, "label_column", "dataset"),
            max_rows=block.get("max_rows"),
            has_header=bool(block.get("has_header", True)),
            shuffle_seed=block.get("shuffle_seed"),
            add_intercept=bool(block.get("add_intercept", False)),
        )
        if bool(block.get("standardize", True)):
            ds, _ = standardize(ds)
        return LogisticOracle(ds.features, ds.labels)
    block = doc["synthetic"]
    _check_keys(block, _SYNTHETIC_KEYS, "synthetic")
    kind = _require(block, "kind", "synthetic")
    n = int(_require(block, "n", "synthetic"))
    n_samples = int(_require(block, "N", "synthetic"))
    seed = int(block.get("seed", 0))
    if kind == "quadratic":
        return make_rank_deficient_quadratic(
            n, int(_require(block, "rank", "synthetic")), n_samples, seed
        )
    if kind == "logistic":
        if "rank" in block:
            raise CliConfigError("synthetic.rank only applies to kind='quadratic'")
        ds = synthetic_classification_dataset(n, n_samples, seed)
        if bool(block.get("standardize", True)):
            ds, _ = standardize(ds)
        return LogisticOracle(ds.features, ds.labels)
    raise CliConfigError(f"unknown synthetic kind {kind!r}")


def _apply_overrides(doc: dict, args: argparse.Namespace) -> None:
    """Push per-parameter flag overrides into the config document."""
    for key in ("rho", "iterations", "seed", "eval_every", "safeguard_retries", "algorithm"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    for key in _SCHEDULE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            if doc.get("algorithm") == "crsqn":
                doc.setdefault("schedule", {})[key] = value
            elif key == "gamma0":
                doc.setdefault("constants", {})["gamma0"] = value
            else:
                raise CliConfigError(f"--{key} only applies to the crsqn schedule")
    for key in ("mu", "delta"):
        value = getattr(args, key, None)
        if value is not None:
            doc.setdefault("constants", {})[key] = value
    if getattr(args, "out", None) is not None:
        doc["output"] = args.out


def cmd_validate_schedule(args: argparse.Namespace) -> int:
    values = {}
    if args.config is not None:
        doc = _load_document(args.config)
        block = doc.get("schedule", doc)
        for key in _SCHEDULE_KEYS:
            if key in block:
                values[key] = float(block[key])
    for key in _SCHEDULE_KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    missing = [k for k in _SCHEDULE_KEYS if k not in values]
    if missing:
        print(f"error: missing schedule parameters: {missing}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        schedule = PowerLawSchedule(**values)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    reports = {"as": validate_almost_sure(schedule), "mean": validate_mean(schedule)}
    print(f"{'validator':<9} {'condition':<22} {'lhs':>18} {'rhs':>18}  ok")
    for mode, report in reports.items():
        for check in report.checks:
            print(
                f"{mode:<9} {check.name:<22} {check.lhs:>18.12g} {check.rhs:>18.12g}  "
                f"{'yes' if check.ok else 'NO'}"
            )
        for note in report.notes:
            print(f"note ({mode}): {note}")
    for mode, report in reports.items():
        verdict = "valid" if report.valid else "invalid"
        failing = "" if report.valid else " [" + ", ".join(c.name for c in report.violations) + "]"
        print(f"verdict ({mode}): {verdict}{failing}")
    return EXIT_OK if reports[args.mode].valid else EXIT_ANOMALY


def cmd_run(args: argparse.Namespace) -> int:
    try:
        doc = _load_document(args.config)
        _check_keys(doc, _RUN_KEYS, "run config")
        _apply_overrides(doc, args)
        output = doc.get("output")
        if output is None:
            raise CliConfigError("run config needs an 'output' path (or --out)")
        config = _solver_config(doc, "run config")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        oracle = _build_oracle(doc)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MalformedRowError, NonBinaryLabelError, EmptyFileError, InvalidRankError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        config.validate(oracle.dim)
    except ConfigInvalidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        trace = run(oracle, config)
    except NonFiniteIterateError as exc:
        print(f"final_loss=nan status=nonfinite detail={exc}")
        return EXIT_ANOMALY
    try:
        write_trace(trace, output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(
        f"final_loss={trace.final_loss():.6f} status={trace.status} "
        f"iterations={trace.records[-1].k} trace={output}"
    )
    return EXIT_OK if trace.status == "finished" else EXIT_ANOMALY


def _expand_sweeps(block: dict, where: str) -> list[dict]:
    """Expand list-valued schedule/constants entries into one block per combination."""
    sub_key = "schedule" if "schedule" in block else "constants" if "constants" in block else None
    if sub_key is None:
        return [block]
    sub = block[sub_key]
    if not isinstance(sub, dict):
        raise CliConfigError(f"{where}.{sub_key} must be an object")
    swept = [(k, v) for k, v in sub.items() if isinstance(v, list)]
    if not swept:
        return [block]
    expanded = []
    for combo in itertools.product(*(v for _, v in swept)):
        new_sub = dict(sub)
        suffix = []
        for (key, _), value in zip(swept, combo):
            new_sub[key] = value
            suffix.append(f"{key}={value:g}")
        new_block = dict(block)
        new_block[sub_key] = new_sub
        base = block.get("name", block.get("algorithm", ""))
        new_block["name"] = f"{base} {' '.join(suffix)}".strip()
        expanded.append(new_block)
    return expanded


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        doc = _load_document(args.config)
        _check_keys(doc, _COMPARE_KEYS, "compare config")
        if args.out is not None:
            doc["output"] = args.out
        output = doc.get("output")
        if output is None:
            raise CliConfigError("compare config needs an 'output' path (or --out)")
        seeds = doc.get("seeds")
        if seeds is not None and (
            not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds)
        ):
            raise CliConfigError("'seeds' must be a list of integers")
        blocks_raw = _require(doc, "runs", "compare config")
        if not isinstance(blocks_raw, list) or not blocks_raw:
            raise CliConfigError("'runs' must be a non-empty list of run blocks")
        configs = []
        for i, block in enumerate(blocks_raw):
            where = f"runs[{i}]"
            _check_keys(block, _BLOCK_KEYS, where)
            for expanded in _expand_sweeps(block, where):
                configs.append(_solver_config(expanded, where))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        oracle = _build_oracle(doc)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MalformedRowError, NonBinaryLabelError, EmptyFileError, InvalidRankError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        rows = compare(oracle, configs, seeds)
    except ConfigInvalidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteIterateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANOMALY
    try:
        write_comparison_csv(rows, output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for row in rows:
        print(
            f"{row.algorithm:<6} {row.parameter:<28} mean_loss={row.mean_loss:.6f} "
            f"std={row.std_loss:.3e} seeds={row.n_seeds}"
        )
    print(f"table={output}")
    return EXIT_OK


def _add_schedule_flags(parser: argparse.ArgumentParser) -> None:
    for key in _SCHEDULE_KEYS:
        parser.add_argument(f"--{key}", type=float, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crsqn",
        description="Cyclic regularized stochastic quasi-Newton benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate-schedule", help="check tuning-sequence feasibility")
    _add_schedule_flags(p_validate)
    p_validate.add_argument("--mode", choices=("as", "mean"), default="as")
    p_validate.add_argument("--config", default=None, help="JSON document with a schedule block")
    p_validate.set_defaults(handler=cmd_validate_schedule)

    p_run = sub.add_parser("run", help="execute one configured run and write its trace")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--algorithm", choices=("crsqn", "res", "sa"), default=None)
    p_run.add_argument("--rho", type=float, default=None)
    p_run.add_argument("--iterations", type=int, default=None)
    p_run.add_argument("--eval_every", type=int, default=None)
    p_run.add_argument("--safeguard_retries", type=int, default=None)
    _add_schedule_flags(p_run)
    p_run.add_argument("--mu", type=float, default=None)
    p_run.add_argument("--delta", type=float, default=None)
    p_run.set_defaults(handler=cmd_run)

    p_compare = sub.add_parser("compare", help="run several configs and tabulate final losses")
    p_compare.add_argument("--config", required=True)
    p_compare.add_argument("--out", default=None)
    p_compare.set_defaults(handler=cmd_compare)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("CRSQN_LOG", "warn").lower()
    mapping = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    logging.basicConfig(level=mapping.get(level, logging.WARNING))


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
