"""Fold-confined preprocessing: z-scaling, SMOTE + Tomek cleaning, class weights."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .data import ClassCounts, class_counts

__all__ = [
    "Standardizer", "ResampleReport",
    "fit_standardizer", "apply_standardizer",
    "smote_oversample", "tomek_links", "smote_tomek",
    "inverse_frequency_weights", "imbalance_ratio",
]

_ZERO_VAR = 1e-12


@dataclass(frozen=True)
class Standardizer:
    """Per-feature centering/scaling statistics, fitted on training rows only."""

    means: np.ndarray
    scales: np.ndarray


@dataclass(frozen=True)
class ResampleReport:
    """Per-class counts and imbalance ratios before/after SMOTE-Tomek."""

    counts_before: ClassCounts
    counts_after: ClassCounts
    ir_before: float
    ir_after: float
    ir_improvement: float
    synthetic_count: int
    tomek_removed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts_before"] = {str(k): v for k, v in self.counts_before.counts.items()}
        d["counts_after"] = {str(k): v for k, v in self.counts_after.counts.items()}
        d["n_before"] = self.counts_before.total
        d["n_after"] = self.counts_after.total
        return d


def fit_standardizer(X_train) -> Standardizer:
    """Column means and stds of the training matrix; near-constant columns get scale 1."""
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.size == 0:
        raise ValueError("fit_standardizer: empty input")
    means = X_train.mean(axis=0)
    scales = X_train.std(axis=0)
    scales = np.where(scales < _ZERO_VAR, 1.0, scales)
    return Standardizer(means=means, scales=scales)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != s.means.shape[0]:
        raise ValueError(f"apply_standardizer: {X.shape[1]} columns, expected {s.means.shape[0]}")
    return (X - s.means) / s.scales


def _nearest_neighbor_ids(X: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Index of each row's 1-nearest neighbour (self excluded, ties to lower index)."""
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argmin(d2, axis=1)
    return out


def smote_oversample(X, y, target_counts: dict, k_max: int = 5, seed: int = 0):
    """Synthetic minority samples by interpolation toward same-class neighbours.

    Each synthetic point is x_i + lam * (x_nb - x_i) with lam ~ U[0,1) and
    x_nb one of the k = min(k_max, N_c - 1) nearest same-class neighbours;
    base points cycle through a seeded permutation of the class. A singleton
    class is duplicated (lam forced to 0) since interpolation is undefined.
    Returns only the synthetic rows and their labels.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    syn_X, syn_y = [], []
    for c in sorted(target_counts):
        idx = np.flatnonzero(y == c)
        n_c = idx.size
        target = int(target_counts[c])
        if target < n_c:
            raise ValueError(f"smote_oversample: target {target} below current count {n_c} for class {c}")
        deficit = target - n_c
        if deficit == 0:
            continue
        Xc = X[idx]
        if n_c == 1:
            new = np.repeat(Xc, deficit, axis=0)
        else:
            k = min(k_max, n_c - 1)
            d2 = np.einsum("ij,ij->i", Xc, Xc)[:, None] + \
                np.einsum("ij,ij->i", Xc, Xc)[None, :] - 2.0 * (Xc @ Xc.T)
            np.fill_diagonal(d2, np.inf)
            # ties resolved toward lower index for a deterministic neighbour set
            nn = np.lexsort((np.arange(n_c)[None, :].repeat(n_c, 0), d2), axis=1)[:, :k]
            perm = rng.permutation(n_c)
            base = perm[np.arange(deficit) % n_c]
            lam = rng.random(deficit)
            pick = rng.integers(0, k, size=deficit)
            nb = nn[base, pick]
            new = Xc[base] + lam[:, None] * (Xc[nb] - Xc[base])
        syn_X.append(new)
        syn_y.append(np.full(deficit, c, dtype=y.dtype))
    if not syn_X:
        return np.empty((0, X.shape[1])), np.empty(0, dtype=y.dtype)
    return np.vstack(syn_X), np.concatenate(syn_y)


def tomek_links(X, y) -> list[tuple[int, int]]:
    """Cross-class mutual 1-NN pairs (i, j) with i < j, Euclidean distance."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] < 2:
        raise ValueError("tomek_links: need at least 2 samples")
    if np.unique(y).size < 2:
        raise ValueError("tomek_links: need at least 2 classes")
    nn = _nearest_neighbor_ids(X)
    links = []
    for i in range(X.shape[0]):
        j = int(nn[i])
        if i < j and nn[j] == i and y[i] != y[j]:
            links.append((i, j))
    return links


def _tomek_filter(y, links, counts: dict) -> set[int]:
    """Rows to drop: from each link, the member of the larger-count class only."""
    drop: set[int] = set()
    for i, j in links:
        ci, cj = counts[int(y[i])], counts[int(y[j])]
        if ci > cj:
            drop.add(i)
        elif cj > ci:
            drop.add(j)
    return drop


def smote_tomek(X, y, seed: int = 0):
    """Equalize all classes to the majority count, then one Tomek cleaning pass.

    Tomek removal deletes, per link, only the member of the class with the
    larger post-SMOTE count; equal counts delete neither.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    before = class_counts(y)
    if len(before.counts) < 2:
        raise ValueError("smote_tomek: need at least 2 classes")
    majority = max(before.counts.values())
    targets = {c: majority for c in before.counts}

    syn_X, syn_y = smote_oversample(X, y, targets, k_max=5, seed=seed)
    X_bal = np.vstack([X, syn_X]) if syn_X.size else X.copy()
    y_bal = np.concatenate([y, syn_y]) if syn_y.size else y.copy()

    post = class_counts(y_bal)
    links = tomek_links(X_bal, y_bal)
    drop = _tomek_filter(y_bal, links, post.counts)
    if drop:
        keep = np.setdiff1d(np.arange(y_bal.size), np.fromiter(drop, dtype=np.int64))
        X_bal, y_bal = X_bal[keep], y_bal[keep]

    after = class_counts(y_bal)
    ir_b = imbalance_ratio(before)
    ir_a = imbalance_ratio(after)
    report = ResampleReport(
        counts_before=before,
        counts_after=after,
        ir_before=ir_b,
        ir_after=ir_a,
        ir_improvement=ir_b / ir_a,
        synthetic_count=int(syn_y.size),
        tomek_removed=len(drop),
    )
    return X_bal, y_bal, report


def inverse_frequency_weights(y) -> np.ndarray:
    """Instance weights w_c = N / (C * n_c); mean weight is 1 by construction."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("inverse_frequency_weights: empty input")
    values, counts = np.unique(y, return_counts=True)
    n, c = y.size, values.size
    w_by_class = {int(v): n / (c * int(k)) for v, k in zip(values, counts)}
    return np.array([w_by_class[int(label)] for label in y], dtype=np.float64)


def imbalance_ratio(counts: ClassCounts) -> float:
    """Majority count over minority count among classes present."""
    values = list(counts.counts.values())
    return max(values) / min(values)
