"""Dataset ingestion, standardization, and synthetic dataset generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

SD_FLOOR = 1e-12

__all__ = [
    "Dataset",
    "StandardizationStats",
    "MalformedRowError",
    "NonBinaryLabelError",
    "EmptyFileError",
    "load_csv",
    "standardize",
    "synthetic_classification_dataset",
]


class MalformedRowError(ValueError):
    """A CSV data row has the wrong arity or a non-numeric feature."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NonBinaryLabelError(ValueError):
    """A label value is outside {0, 1} (after mapping -1 to 0)."""


class EmptyFileError(ValueError):
    """No data rows found."""


@dataclass
class Dataset:
    """Feature matrix with binary labels backing the finite-sum oracle."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None
    provenance: str = ""

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least one row and one feature, got shape {(n, d)}")
        if self.labels.shape[0] != n:
            raise ValueError("labels length does not match the number of rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features have non-finite entries")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise NonBinaryLabelError("labels must be 0 or 1")
        if self.feature_names is not None and len(self.feature_names) != d:
            raise ValueError("feature_names length does not match the number of columns")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class StandardizationStats:
    """Per-column mean and (floored) population standard deviation."""

    mean: np.ndarray
    sd: np.ndarray


def _resolve_label_index(label_column, header: list[str] | None, width: int) -> int:
    if isinstance(label_column, int) or (
        isinstance(label_column, str) and label_column.lstrip("-").isdigit()
    ):
        idx = int(label_column)
        if not -width <= idx < width:
            raise ValueError(f"label column index {idx} out of range for {width} columns")
        return idx % width
    if header is None:
        raise ValueError("label column by name requires a header row")
    try:
        return header.index(str(label_column))
    except ValueError:
        raise ValueError(f"label column {label_column!r} not found in header {header}") from None


def _parse_label(raw: str, row: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise NonBinaryLabelError(f"row {row}: non-numeric label {raw!r}") from None
    if value == -1.0:
        return 0
    if value in (0.0, 1.0):
        return int(value)
    raise NonBinaryLabelError(f"row {row}: label {raw!r} is not in {{-1, 0, 1}}")


def load_csv(
    path,
    label_column,
    max_rows: int | None = None,
    has_header: bool = True,
    shuffle_seed: int | None = None,
    add_intercept: bool = False,
) -> Dataset:
    """Parse an RFC-4180-style CSV into a Dataset.

    Labels in {0, 1} are kept and {-1, 1} labels are mapped -1 -> 0. Row
    subsetting is a deterministic prefix of the file order; pass
    ``shuffle_seed`` to take the prefix of a seeded shuffle instead. Row
    numbers in errors are 1-based over data rows (the header not counted).
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = None
        if has_header:
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyFileError(f"{path} is empty") from None
        rows: list[list[str]] = []
        width = len(header) if header is not None else None
        for row_number, raw in enumerate(reader, start=1):
            if not raw:
                continue
            if width is None:
                width = len(raw)
            if len(raw) != width:
                raise MalformedRowError(row_number, f"expected {width} fields, got {len(raw)}")
            rows.append(raw)
            if shuffle_seed is None and max_rows is not None and len(rows) >= max_rows:
                break
    if not rows:
        raise EmptyFileError(f"{path} has no data rows")

    selection_note = "all rows"
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(rows))
        rows = [rows[i] for i in order]
        selection_note = f"shuffled(seed={shuffle_seed})"
    if max_rows is not None:
        rows = rows[:max_rows]
        selection_note = f"first {len(rows)} of {selection_note}"

    label_idx = _resolve_label_index(label_column, header, width)
    features = np.empty((len(rows), width - 1))
    labels = np.empty(len(rows), dtype=np.int64)
    for i, raw in enumerate(rows):
        labels[i] = _parse_label(raw[label_idx], i + 1)
        j = 0
        for col, cell in enumerate(raw):
            if col == label_idx:
                continue
            try:
                features[i, j] = float(cell)
            except ValueError:
                raise MalformedRowError(i + 1, f"non-numeric feature {cell!r} in column {col}") from None
            j += 1

    names = None
    if header is not None:
        names = [name for col, name in enumerate(header) if col != label_idx]
    if add_intercept:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
        if names is not None:
            names = names + ["intercept"]
    return Dataset(
        features=features,
        labels=labels,
        feature_names=names,
        provenance=f"{path} ({selection_note}{', intercept appended' if add_intercept else ''})",
    )


def standardize(ds: Dataset) -> tuple[Dataset, StandardizationStats]:
    """Shift/scale every column to zero mean and unit (population) variance.

    Constant columns come out all-zero thanks to the deviation floor.
    """
    if ds.n_samples < 2:
        raise ValueError("standardization needs at least two rows")
    mean = ds.features.mean(axis=0)
    sd = np.maximum(ds.features.std(axis=0), SD_FLOOR)
    out = Dataset(
        features=(ds.features - mean) / sd,
        labels=ds.labels.copy(),
        feature_names=None if ds.feature_names is None else list(ds.feature_names),
        provenance=f"{ds.provenance} [standardized]",
    )
    return out, StandardizationStats(mean=mean, sd=sd)


def synthetic_classification_dataset(
    n_features: int, n_samples: int, seed: int = 0, weight_norm: float = 2.0
) -> Dataset:
    """Seeded gaussian-feature dataset with Bernoulli labels from a linear logit."""
    if n_features < 1 or n_samples < 1:
        raise ValueError("need n_features >= 1 and n_samples >= 1")
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n_samples, n_features))
    w = rng.standard_normal(n_features)
    w *= weight_norm / np.linalg.norm(w)
    labels = (rng.random(n_samples) < expit(features @ w)).astype(np.int64)
    return Dataset(
        features=features,
        labels=labels,
        provenance=f"synthetic-logistic(n={n_features}, N={n_samples}, seed={seed})",
    )
