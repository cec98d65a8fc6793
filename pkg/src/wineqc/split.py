"""Stratified holdout and stratified group K-fold planning."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset

__all__ = ["HoldoutSplit", "FoldPlan", "stratified_holdout", "stratified_group_kfold"]


@dataclass(frozen=True)
class HoldoutSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    """K disjoint (train, validation) index pairs over the training rows."""

    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    k: int
    seed: int

    def to_json(self) -> str:
        payload = {
            "k": self.k,
            "seed": self.seed,
            "folds": [
                {"train": sorted(int(i) for i in tr),
                 "validation": sorted(int(i) for i in va)}
                for tr, va in self.folds
            ],
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FoldPlan":
        payload = json.loads(text)
        folds = tuple(
            (np.asarray(f["train"], dtype=np.int64),
             np.asarray(f["validation"], dtype=np.int64))
            for f in payload["folds"]
        )
        return FoldPlan(folds=folds, k=int(payload["k"]), seed=int(payload["seed"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def _per_class_test_allocation(counts: np.ndarray, test_fraction: float) -> np.ndarray:
    """Largest-remainder allocation of the total test size across classes.

    Total test size is ceil(n * fraction); per-class base is the floor of the
    exact share, remainders promoted by descending fractional part (ties to
    the smaller class label). Keeps every class within one sample of its
    exact share.
    """
    n = int(counts.sum())
    n_test = int(np.ceil(n * test_fraction))
    exact = counts * test_fraction
    base = np.floor(exact).astype(np.int64)
    base = np.minimum(base, counts)
    missing = n_test - int(base.sum())
    if missing > 0:
        frac = exact - np.floor(exact)
        frac[base >= counts] = -1.0
        order = np.lexsort((np.arange(len(counts)), -frac))
        for idx in order[:missing]:
            base[idx] += 1
    return base


def stratified_holdout(dataset: Dataset, test_fraction: float, seed: int) -> HoldoutSplit:
    """Class-stratified train/test split; shuffling within class is seed-driven."""
    if dataset.n == 0:
        raise ValueError("stratified_holdout: empty dataset")
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"stratified_holdout: degenerate fraction {test_fraction}")

    rng = np.random.default_rng(seed)
    classes = np.asarray(dataset.class_vocab)
    counts = np.array([(dataset.labels == c).sum() for c in classes], dtype=np.int64)
    alloc = _per_class_test_allocation(counts, test_fraction)

    train, test = [], []
    for c, take in zip(classes, alloc):
        idx = np.flatnonzero(dataset.labels == c)
        perm = rng.permutation(idx)
        test.append(perm[:take])
        train.append(perm[take:])
    return HoldoutSplit(
        train_indices=np.sort(np.concatenate(train)).astype(np.int64),
        test_indices=np.sort(np.concatenate(test)).astype(np.int64),
    )


def stratified_group_kfold(labels, groups, k: int, seed: int) -> FoldPlan:
    """Greedy group-atomic stratified K-fold plan.

    Groups are placed largest first (equal sizes in seeded random order) into
    the fold that minimizes the resulting per-class proportion deviation;
    ties break toward the lower fold index. No group ever spans two folds.
    """
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if labels.size == 0:
        raise ValueError("stratified_group_kfold: empty input")
    if labels.shape != groups.shape:
        raise ValueError("stratified_group_kfold: labels and groups length mismatch")
    if k < 2:
        raise ValueError(f"stratified_group_kfold: k must be >= 2, got {k}")

    unique_groups, group_ids = np.unique(groups, return_inverse=True)
    n_groups = unique_groups.size
    if k > n_groups:
        raise ValueError(f"stratified_group_kfold: k={k} exceeds {n_groups} distinct groups")

    classes, y = np.unique(labels, return_inverse=True)
    n_classes = classes.size
    # per-group class count matrix
    gc = np.zeros((n_groups, n_classes), dtype=np.int64)
    np.add.at(gc, (group_ids, y), 1)
    class_totals = gc.sum(axis=0).astype(np.float64)

    rng = np.random.default_rng(seed)
    order = rng.permutation(n_groups)
    sizes = gc.sum(axis=1)
    order = order[np.argsort(-sizes[order], kind="stable")]

    fold_counts = np.zeros((k, n_classes), dtype=np.float64)
    assignment = np.empty(n_groups, dtype=np.int64)
    for g in order:
        best_fold, best_dev = 0, np.inf
        for f in range(k):
            fold_counts[f] += gc[g]
            props = fold_counts / class_totals
            dev = float(np.mean(np.std(props, axis=0)))
            fold_counts[f] -= gc[g]
            if dev < best_dev:
                best_dev, best_fold = dev, f
        fold_counts[best_fold] += gc[g]
        assignment[g] = best_fold

    all_rows = np.arange(labels.size, dtype=np.int64)
    row_fold = assignment[group_ids]
    folds = []
    for f in range(k):
        val = all_rows[row_fold == f]
        tr = all_rows[row_fold != f]
        folds.append((tr, val))
    return FoldPlan(folds=tuple(folds), k=k, seed=seed)
