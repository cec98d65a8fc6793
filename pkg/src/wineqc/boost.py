"""Gradient boosting: first-order functional descent and second-order
histogram boosters with regularized gains, GOSS, leaf-wise and oblivious
growth, early stopping, and the ordered target-statistic encoder."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .forest import resolve_max_features
from .metrics import weighted_f1

__all__ = [
    "BoostConfig", "GradHess", "BoostModel",
    "softmax_grad_hess", "split_gain", "leaf_weight", "histogram_bin",
    "goss_sample", "ordered_target_statistic",
    "fit_gbm_first_order", "fit_gbm_second_order",
    "predict_proba", "predict_raw", "gain_importance", "write_round_log",
]

_GROWTH = {"level": 0, "leaf_wise": 1, "oblivious": 2}


@dataclass(frozen=True)
class BoostConfig:
    """Knobs shared by both booster flavors; unused fields are ignored.

    ``validation_fraction`` = 0 disables the internal early-stopping split
    (useful for diagnostics); tuned runs draw it from [0.10, 0.20].
    """

    rounds: int = 100
    learning_rate: float = 0.1
    subsample: float = 1.0
    column_fraction: float = 1.0
    max_depth: int = 6
    min_child_weight: float = 1.0
    gamma: float = 0.0
    lambda_reg: float = 1.0
    alpha_reg: float = 0.0
    num_leaves: int = 31
    growth: str = "level"
    goss_enabled: bool = False
    goss_top_rate: float = 0.2
    goss_other_rate: float = 0.1
    bins: int = 256
    early_stopping_rounds: int = 10
    validation_fraction: float = 0.15
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    max_features: str | float | None = None
    extra_trees: bool = False
    bagging_temperature: float = 0.0
    seed: int = 0

    def validate(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0 < self.subsample <= 1) or not (0 < self.column_fraction <= 1):
            raise ValueError("subsample and column_fraction must be in (0, 1]")
        if self.gamma < 0 or self.lambda_reg < 0 or self.alpha_reg < 0:
            raise ValueError("regularization terms must be >= 0")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.growth not in _GROWTH:
            raise ValueError(f"unknown growth {self.growth!r}")
        if self.goss_enabled:
            if self.goss_top_rate <= 0 or self.goss_other_rate <= 0 \
                    or self.goss_top_rate + self.goss_other_rate > 1:
                raise ValueError("GOSS rates must satisfy a > 0, b > 0, a + b <= 1")
        if not (0 <= self.validation_fraction < 0.5):
            raise ValueError("validation_fraction must be in [0, 0.5)")
        if self.max_depth < 1 or self.num_leaves < 2 or self.min_samples_leaf < 1:
            raise ValueError("invalid tree limits")


@dataclass(frozen=True)
class GradHess:
    """Per-class negative gradients and hessians of the softmax deviance."""

    g: np.ndarray
    h: np.ndarray


@dataclass
class _BinTree:
    feature: np.ndarray
    split_bin: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def leaf_values(self, codes) -> np.ndarray:
        ids = _kernels.apply_binned_tree(codes, self.feature, self.split_bin,
                                         self.left, self.right)
        return self.value[ids]


@dataclass
class _ObliviousTree:
    level_feat: np.ndarray
    level_bin: np.ndarray
    values: np.ndarray

    def leaf_values(self, codes) -> np.ndarray:
        if self.level_feat.size == 0:
            return np.full(codes.shape[0], self.values[0])
        ids = _kernels.apply_oblivious_tree(codes, self.level_feat, self.level_bin)
        return self.values[ids]


@dataclass
class _RegTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def leaf_values(self, X) -> np.ndarray:
        ids = _kernels.apply_tree(X, self.feature, self.threshold,
                                  self.left, self.right)
        return self.value[ids]


@dataclass
class BoostModel:
    kind: str                                  # "first_order" | "second_order"
    trees: list[list]                          # [round][class]
    base_scores: np.ndarray
    class_vocab: tuple[int, ...]
    config: BoostConfig
    n_features: int
    best_iteration: int
    history: list[tuple[int, float, float]]    # (round, train_loss, val_wf1)
    edges: list[np.ndarray] | None = None
    feat_gain: np.ndarray = field(repr=False, default=None)

    @property
    def n_rounds(self) -> int:
        return len(self.trees)


# ---------------------------------------------------------------------------
# standalone operations
# ---------------------------------------------------------------------------

def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_grad_hess(labels, raw_scores, instance_weights=None) -> GradHess:
    """Negative gradient w*(1[y=c]-p_c) and hessian w*p_c*(1-p_c) per class."""
    scores = np.asarray(raw_scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("softmax_grad_hess: non-finite scores")
    labels = np.asarray(labels)
    n, c = scores.shape
    if instance_weights is None:
        instance_weights = np.ones(n)
    w = np.asarray(instance_weights, dtype=np.float64)[:, None]
    p = _softmax(scores)
    onehot = np.zeros_like(p)
    onehot[np.arange(n), labels] = 1.0
    return GradHess(g=w * (onehot - p), h=w * p * (1.0 - p))


def split_gain(G, H, G_L, H_L, G_R, H_R, lam, gamma=0.0) -> float:
    """Regularized children-minus-parent gain of a candidate split."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not math.isclose(G_L + G_R, G, rel_tol=1e-9, abs_tol=1e-9) \
            or not math.isclose(H_L + H_R, H, rel_tol=1e-9, abs_tol=1e-9):
        raise ValueError("split_gain: children sums must add up to the parent")
    if H_L < 0 or H_R < 0:
        raise ValueError("split_gain: hessian sums must be >= 0")
    return 0.5 * (G_L * G_L / (H_L + lam) + G_R * G_R / (H_R + lam)
                  - G * G / (H + lam)) - gamma


def leaf_weight(G, H, lam, alpha=0.0) -> float:
    """Optimal leaf value -G/(H+lam), with L1 soft-thresholding of G."""
    if H + lam <= 0:
        raise ValueError("leaf_weight: H + lambda must be > 0")
    if G > alpha:
        G = G - alpha
    elif G < -alpha:
        G = G + alpha
    else:
        G = 0.0
    return -G / (H + lam)


def histogram_bin(X_train, n_bins: int):
    """Quantile bin edges per feature plus the binned training matrix.

    Features with at most ``n_bins`` distinct values bin losslessly at
    midpoints; otherwise up to ``n_bins - 1`` distinct quantile edges are
    used. Bin index = count of edges <= value.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    X_train = np.asarray(X_train, dtype=np.float64)
    edges = []
    for f in range(X_train.shape[1]):
        col = X_train[:, f]
        distinct = np.unique(col)
        if distinct.size <= n_bins:
            e = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            probs = np.arange(1, n_bins) / n_bins
            e = np.unique(np.quantile(col, probs))
        edges.append(e)
    return edges, bin_with_edges(X_train, edges)


def bin_with_edges(X, edges: list[np.ndarray]) -> np.ndarray:
    """Apply training-derived edges to any matrix (count of edges <= value)."""
    X = np.asarray(X, dtype=np.float64)
    codes = np.empty(X.shape, dtype=np.int16)
    for f, e in enumerate(edges):
        codes[:, f] = np.searchsorted(e, X[:, f], side="right")
    return np.ascontiguousarray(codes)


def goss_sample(grad_norms, top_rate: float, other_rate: float, seed: int):
    """Keep the top a*n rows by gradient magnitude, sample b*n of the rest.

    Returns (row indices, multipliers); sampled small-gradient rows carry the
    compensation factor (1 - a) / b.
    """
    if top_rate <= 0 or other_rate <= 0 \
            or (top_rate + other_rate > 1 and top_rate < 1):
        raise ValueError("GOSS rates must satisfy a > 0, b > 0, a + b <= 1")
    norms = np.asarray(grad_norms, dtype=np.float64)
    n = norms.size
    n_top = min(n, int(np.ceil(top_rate * n)))
    order = np.argsort(-norms, kind="stable")
    top = np.sort(order[:n_top])
    rest = np.sort(order[n_top:])
    n_other = min(rest.size, int(np.ceil(other_rate * n)))
    if n_other > 0 and rest.size > 0:
        rng = np.random.default_rng(seed)
        sampled = np.sort(rng.choice(rest, size=n_other, replace=False))
    else:
        sampled = np.empty(0, dtype=np.int64)
    indices = np.concatenate([top, sampled])
    multipliers = np.concatenate([
        np.ones(top.size),
        np.full(sampled.size, (1.0 - top_rate) / other_rate),
    ])
    return indices, multipliers


def ordered_target_statistic(prior_pairs, query_category, a: float, prior: float) -> float:
    """Bayesian-smoothed mean of targets over strictly earlier occurrences."""
    if a <= 0:
        raise ValueError("smoothing a must be > 0")
    count = 0
    total = 0.0
    for cat, target in prior_pairs:
        if cat == query_category:
            count += 1
            total += target
    return (total + a * prior) / (count + a)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _dense_labels(y):
    vocab = tuple(int(c) for c in np.unique(y))
    lookup = {c: i for i, c in enumerate(vocab)}
    yi = np.array([lookup[int(v)] for v in y], dtype=np.int64)
    return yi, vocab


def _stratified_carve(yi, fraction, rng):
    """Seeded stratified split of row positions into (fit, holdout)."""
    n = yi.size
    if fraction <= 0:
        return np.arange(n), np.empty(0, dtype=np.int64)
    fit, hold = [], []
    for c in np.unique(yi):
        idx = rng.permutation(np.flatnonzero(yi == c))
        k = int(round(fraction * idx.size))
        if idx.size >= 2:
            k = min(max(k, 1), idx.size - 1)
        else:
            k = 0
        hold.append(idx[:k])
        fit.append(idx[k:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(hold))


def _base_scores(yi, w, n_classes):
    prior = np.bincount(yi, weights=w, minlength=n_classes)
    prior = prior / prior.sum()
    return np.log(np.maximum(prior, 1e-12))


def _deviance(p, yi, w):
    return float(-(w * np.log(np.maximum(p[np.arange(yi.size), yi], 1e-300))).sum()
                 / w.sum())


def _sample_rows(config: BoostConfig, g, rng_round, seed_round, n):
    """Round-level row sampling: plain subsample, GOSS, or Bayesian weights."""
    if config.goss_enabled:
        norms = np.abs(g).sum(axis=1)
        rows, mult = goss_sample(norms, config.goss_top_rate,
                                 config.goss_other_rate, seed_round)
        mult_vec = np.zeros(n)
        mult_vec[rows] = mult
        return rows.astype(np.int64), mult_vec
    if config.bagging_temperature > 0:
        u = rng_round.random(n)
        mult_vec = (-np.log(np.maximum(u, 1e-300))) ** config.bagging_temperature
        return np.arange(n, dtype=np.int64), mult_vec
    if config.subsample < 1.0:
        k = max(1, int(config.subsample * n))
        rows = np.sort(rng_round.permutation(n)[:k]).astype(np.int64)
        mult_vec = np.zeros(n)
        mult_vec[rows] = 1.0
        return rows, mult_vec
    return np.arange(n, dtype=np.int64), np.ones(n)


def _fit_boost(X, y, weights, config: BoostConfig, kind: str) -> BoostModel:
    config.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, d = X.shape
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=np.float64)
    yi, vocab = _dense_labels(y)
    n_classes = len(vocab)
    if n_classes < 2:
        raise ValueError("need at least 2 classes in the training data")

    master = np.random.SeedSequence([config.seed])
    rng_split, rng_rounds, rng_cols = [np.random.default_rng(s)
                                       for s in master.spawn(3)]

    fit_rows, val_rows = _stratified_carve(yi, config.validation_fraction, rng_split)
    Xf, yf, wf = X[fit_rows], yi[fit_rows], weights[fit_rows]
    Xv, yv = X[val_rows], yi[val_rows]
    has_val = yv.size > 0

    binned = kind == "second_order"
    if binned:
        edges, codes_f = histogram_bin(Xf, config.bins)
        codes_v = bin_with_edges(Xv, edges) if has_val else None
        n_bins = max(2, max((e.size + 1 for e in edges), default=2))
    else:
        edges, codes_f, codes_v, n_bins = None, None, None, 0

    base = _base_scores(yf, wf, n_classes)
    scores_f = np.tile(base, (Xf.shape[0], 1))
    scores_v = np.tile(base, (Xv.shape[0], 1)) if has_val else None

    growth = _GROWTH[config.growth]
    m_cols = max(1, int(np.ceil(config.column_fraction * d)))
    m_node = resolve_max_features(config.max_features, d)
    all_feats = np.arange(d, dtype=np.int64)
    onehot = np.eye(n_classes)

    trees: list[list] = []
    history: list[tuple[int, float, float]] = []
    feat_gain = np.zeros(d)
    best_round = -1
    best_score = -np.inf

    p = _softmax(scores_f)
    for t in range(config.rounds):
        gh = GradHess(g=wf[:, None] * (onehot[yf] - p),
                      h=wf[:, None] * p * (1.0 - p))
        seed_round = int(np.random.SeedSequence([config.seed, 101, t]).generate_state(1)[0])
        rows, mult_vec = _sample_rows(config, gh.g, rng_rounds, seed_round, Xf.shape[0])

        round_trees = []
        for c in range(n_classes):
            gc = np.ascontiguousarray(gh.g[:, c] * mult_vec)
            hc = np.ascontiguousarray(gh.h[:, c] * mult_vec)
            if m_cols < d:
                feats = np.sort(rng_cols.choice(d, size=m_cols, replace=False)).astype(np.int64)
            else:
                feats = all_feats
            tree_seed = int(np.random.SeedSequence(
                [config.seed, 202, t, c]).generate_state(1)[0])
            if not binned:
                out = _kernels.grow_reg_tree(
                    Xf, gc, hc, rows, config.max_depth,
                    config.min_samples_split, config.min_samples_leaf,
                    m_node, config.lambda_reg, tree_seed)
                _, feat, thr, left, right, value, fg = out
                tree = _RegTree(feat, thr, left, right, value)
            elif growth == 2:
                used = np.zeros((d, n_bins), dtype=np.uint8)
                out = _kernels.grow_oblivious_tree(
                    codes_f, gc, hc, rows, feats, n_bins, config.max_depth,
                    config.lambda_reg, config.min_child_weight, used)
                _, lv_feat, lv_bin, values, fg = out
                tree = _ObliviousTree(lv_feat, lv_bin, values)
            else:
                out = _kernels.grow_hist_tree(
                    codes_f, gc, hc, rows, feats, n_bins, growth,
                    config.max_depth, config.num_leaves, config.lambda_reg,
                    config.gamma, config.alpha_reg, config.min_child_weight,
                    config.min_samples_leaf, config.extra_trees, tree_seed)
                _, feat, bins_, left, right, value, fg = out
                tree = _BinTree(feat, bins_, left, right, value)
            feat_gain += fg
            round_trees.append(tree)
            data_f = codes_f if binned else Xf
            scores_f[:, c] += config.learning_rate * tree.leaf_values(data_f)
            if has_val:
                data_v = codes_v if binned else Xv
                scores_v[:, c] += config.learning_rate * tree.leaf_values(data_v)
        trees.append(round_trees)

        p = _softmax(scores_f)
        train_loss = _deviance(p, yf, wf)
        if has_val:
            pred_v = np.argmax(scores_v, axis=1)
            val_wf1 = weighted_f1(yv, pred_v, list(range(n_classes)))
        else:
            val_wf1 = float("nan")
        history.append((t, train_loss, val_wf1))

        if has_val:
            if val_wf1 > best_score:
                best_score = val_wf1
                best_round = t
            if t - best_round >= config.early_stopping_rounds:
                break
        else:
            best_round = t

    trees = trees[:best_round + 1]
    return BoostModel(kind=kind, trees=trees, base_scores=base,
                      class_vocab=vocab, config=config, n_features=d,
                      best_iteration=best_round, history=history,
                      edges=edges, feat_gain=feat_gain)


def fit_gbm_first_order(X, y, weights=None, config: BoostConfig | None = None) -> BoostModel:
    """Functional gradient descent: least-squares trees on the gradients."""
    return _fit_boost(X, y, weights, config or BoostConfig(lambda_reg=0.0), "first_order")


def fit_gbm_second_order(X, y, weights=None, config: BoostConfig | None = None) -> BoostModel:
    """Histogram booster with second-order regularized gains."""
    return _fit_boost(X, y, weights, config or BoostConfig(), "second_order")


# ---------------------------------------------------------------------------
# inference and reporting
# ---------------------------------------------------------------------------

def predict_raw(model: BoostModel, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ValueError(f"predict: {X.shape[1]} features, model has {model.n_features}")
    data = bin_with_edges(X, model.edges) if model.edges is not None else X
    scores = np.tile(model.base_scores, (X.shape[0], 1))
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            scores[:, c] += model.config.learning_rate * tree.leaf_values(data)
    return scores


def predict_proba(model: BoostModel, X) -> np.ndarray:
    """softmax(base + lr * sum of trees), rows summing to 1."""
    return _softmax(predict_raw(model, X))


def gain_importance(model: BoostModel) -> np.ndarray:
    """Per-feature split-criterion gain totals, normalized to unit sum."""
    total = model.feat_gain.sum()
    if total <= 0:
        return np.full(model.feat_gain.size, 1.0 / model.feat_gain.size)
    return model.feat_gain / total


def write_round_log(model: BoostModel, path) -> None:
    """Per-round CSV (round, train loss, validation weighted F1)."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "train_loss", "val_weighted_f1"])
        for row in model.history:
            writer.writerow([row[0], repr(row[1]), repr(row[2])])
