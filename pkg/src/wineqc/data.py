"""Dataset ingestion and the canonical sample table used by every other module."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Dataset", "ClassCounts", "load_csv", "class_counts"]


@dataclass(frozen=True)
class Dataset:
    """Immutable table of samples: features, integer quality labels, group ids.

    Labels are kept as raw quality scores (no re-indexing); dense class
    indices are derived per-fit from the training data only.
    """

    features: np.ndarray          # (n, d) float64, finite
    labels: np.ndarray            # (n,) int64, values in 0..10
    groups: np.ndarray            # (n,) int64, pairwise distinct by default
    feature_names: tuple[str, ...]
    class_vocab: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "class_vocab",
                           tuple(int(c) for c in np.unique(self.labels)))
        for arr in (self.features, self.labels, self.groups):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def select_features(self, names: list[str]) -> "Dataset":
        """New Dataset restricted to the named feature columns (order preserved)."""
        missing = [m for m in names if m not in self.feature_names]
        if missing:
            raise ValueError(f"unknown feature names: {missing}")
        cols = [self.feature_names.index(m) for m in names]
        return Dataset(
            features=self.features[:, cols].copy(),
            labels=self.labels.copy(),
            groups=self.groups.copy(),
            feature_names=tuple(names),
        )


@dataclass(frozen=True)
class ClassCounts:
    """Exact per-class sample counts; ``total`` is the number of instances."""

    counts: dict[int, int]
    total: int

    def as_sorted_items(self) -> list[tuple[int, int]]:
        return sorted(self.counts.items())


def load_csv(path: str | Path, delimiter: str = ";", label_column: str = "quality") -> Dataset:
    """Load a delimited numeric table with a header row into a Dataset.

    Every row must parse completely; a malformed row aborts ingestion with
    its row number so the published sample count can never silently change.
    Group ids default to the row index (one unique group per record).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = [h.strip().strip('"') for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header {header}")
        label_pos = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_pos)

        feat_rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: non-numeric cell ({exc})") from None
            label = values.pop(label_pos)
            if not label.is_integer() or not (0 <= label <= 10):
                raise ValueError(
                    f"{path}: row {row_no}: label {label} outside integer range 0..10")
            feat_rows.append(values)
            labels.append(int(label))

    if not feat_rows:
        raise ValueError(f"{path}: no data rows")
    features = np.asarray(feat_rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        bad = int(np.argwhere(~np.isfinite(features))[0][0])
        raise ValueError(f"{path}: non-finite feature value in data row {bad + 1}")

    return Dataset(
        features=features,
        labels=np.asarray(labels, dtype=np.int64),
        groups=np.arange(len(labels), dtype=np.int64),
        feature_names=feature_names,
    )


def class_counts(labels) -> ClassCounts:
    """Multiset counts of a label vector."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("class_counts: empty label vector")
    values, counts = np.unique(labels, return_counts=True)
    return ClassCounts(
        counts={int(v): int(c) for v, c in zip(values, counts)},
        total=int(labels.size),
    )
