"""Line-delimited persistence of run traces and comparison tables.

The first line is a header object carrying the schema tag, terminal status,
and the full config echo; every following line is one trace record. Floats
go through Python's shortest round-trip representation, so write -> read is
bit-exact and identical runs produce byte-identical files (wall-clock
timings are deliberately not persisted).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict

from .schedules import PowerLawSchedule
from .solvers import ComparisonRow, RunTrace, SolverConfig, TraceRecord

SCHEMA_TAG = "crsqn-trace/1"

_RECORD_KEYS = (
    "k",
    "gamma",
    "delta",
    "mu",
    "sample_id",
    "grad_evals",
    "secant_residual",
    "y_reg_norm",
    "skipped",
    "loss",
    "gap",
)

_HEADER_KEYS = ("schema", "status", "config", "final_x")

__all__ = ["SCHEMA_TAG", "SchemaMismatchError", "write_trace", "read_trace", "write_comparison_csv"]


class SchemaMismatchError(ValueError):
    """A trace file line does not match the crsqn-trace/1 schema."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _config_to_dict(config: SolverConfig) -> dict:
    out = {
        "algorithm": config.algorithm,
        "schedule": None if config.schedule is None else asdict(config.schedule),
        "gamma0": config.gamma0,
        "mu": config.mu,
        "delta": config.delta,
        "rho": config.rho,
        "iterations": config.iterations,
        "seed": config.seed,
        "eval_every": config.eval_every,
        "safeguard_retries": config.safeguard_retries,
        "x0": None if config.x0 is None else list(config.x0),
        "name": config.name,
    }
    return out


def _config_from_dict(raw: dict) -> SolverConfig:
    schedule = raw.get("schedule")
    return SolverConfig(
        algorithm=raw["algorithm"],
        schedule=None if schedule is None else PowerLawSchedule(**schedule),
        gamma0=raw.get("gamma0"),
        mu=raw.get("mu"),
        delta=raw.get("delta"),
        rho=raw["rho"],
        iterations=raw["iterations"],
        seed=raw["seed"],
        eval_every=raw["eval_every"],
        safeguard_retries=raw["safeguard_retries"],
        x0=None if raw.get("x0") is None else tuple(raw["x0"]),
        name=raw.get("name"),
    )


def _dump(obj) -> str:
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def write_trace(trace: RunTrace, path) -> None:
    """Write one header line plus one line per record."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        header = {
            "schema": SCHEMA_TAG,
            "status": trace.status,
            "config": _config_to_dict(trace.config),
            "final_x": list(trace.final_x),
        }
        handle.write(_dump(header) + "\n")
        for record in trace.records:
            row = {key: getattr(record, key) for key in _RECORD_KEYS}
            handle.write(_dump(row) + "\n")


def _parse_line(line: str, number: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaMismatchError(number, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise SchemaMismatchError(number, "expected a JSON object")
    return obj


def read_trace(path) -> RunTrace:
    """Read a trace file back; bit-exact inverse of write_trace."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise SchemaMismatchError(1, "file is empty")
    header = _parse_line(lines[0], 1)
    if set(header) != set(_HEADER_KEYS):
        raise SchemaMismatchError(1, f"header keys {sorted(header)} != {sorted(_HEADER_KEYS)}")
    if header["schema"] != SCHEMA_TAG:
        raise SchemaMismatchError(1, f"schema {header['schema']!r}, expected {SCHEMA_TAG!r}")
    try:
        config = _config_from_dict(header["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatchError(1, f"bad config echo: {exc}") from None

    records = []
    previous_k = None
    for number, line in enumerate(lines[1:], start=2):
        raw = _parse_line(line, number)
        if set(raw) != set(_RECORD_KEYS):
            raise SchemaMismatchError(number, f"record keys {sorted(raw)} != {sorted(_RECORD_KEYS)}")
        if not isinstance(raw["k"], int):
            raise SchemaMismatchError(number, "k must be an integer")
        if previous_k is not None and raw["k"] <= previous_k:
            raise SchemaMismatchError(number, "record iterations must be strictly increasing")
        previous_k = raw["k"]
        records.append(TraceRecord(**raw))
    return RunTrace(
        records=records,
        status=header["status"],
        config=config,
        final_x=tuple(header["final_x"]),
    )


def write_comparison_csv(rows: list[ComparisonRow], path) -> None:
    """Persist a comparison table as CSV (full-precision floats)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["algorithm", "parameter", "mean_loss", "std_loss", "n_seeds"])
        for row in rows:
            writer.writerow(
                [row.algorithm, row.parameter, repr(row.mean_loss), repr(row.std_loss), row.n_seeds]
            )
