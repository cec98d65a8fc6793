"""CART trees and bootstrap random forests with OOB and impurity importances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "TreeNode", "ForestConfig", "ForestModel", "ForestDiagnostics",
    "gini_impurity", "entropy_impurity",
    "fit_cart", "fit_random_forest", "predict_proba",
    "oob_error", "mdi_importance", "rf_error_bound", "forest_diagnostics",
    "model_to_json",
]

_CRITERIA = {"gini": 0, "entropy": 1, "log_loss": 2}


def gini_impurity(class_weights) -> float:
    """1 - sum(p^2) over class weight shares."""
    w = np.asarray(class_weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return 0.0
    p = w / total
    return float(1.0 - (p * p).sum())


def entropy_impurity(class_weights) -> float:
    """-sum(p log p) over class weight shares (natural log)."""
    w = np.asarray(class_weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return 0.0
    p = w[w > 0] / total
    return float(-(p * np.log(p)).sum())


@dataclass
class TreeNode:
    """Recursive node view: internal (feature, threshold) or leaf posterior."""

    feature: int | None
    threshold: float | None
    left: "TreeNode | None"
    right: "TreeNode | None"
    posterior: np.ndarray
    weighted_count: float

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def predict_one(self, x) -> np.ndarray:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.posterior

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"posterior": self.posterior.tolist(),
                    "weighted_count": self.weighted_count}
        return {"feature": int(self.feature), "threshold": float(self.threshold),
                "weighted_count": self.weighted_count,
                "left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: int = 25
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str | float = "sqrt"
    bootstrap: bool = True
    criterion: str = "gini"
    seed: int = 0


@dataclass
class _PackedTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    posterior: np.ndarray
    node_weight: np.ndarray

    def leaf_ids(self, X: np.ndarray) -> np.ndarray:
        return _kernels.apply_tree(X, self.feature, self.threshold,
                                   self.left, self.right)

    def to_node(self, i: int = 0) -> TreeNode:
        if self.feature[i] == _kernels.LEAF:
            return TreeNode(None, None, None, None,
                            self.posterior[i].copy(), float(self.node_weight[i]))
        return TreeNode(int(self.feature[i]), float(self.threshold[i]),
                        self.to_node(int(self.left[i])),
                        self.to_node(int(self.right[i])),
                        self.posterior[i].copy(), float(self.node_weight[i]))


@dataclass
class ForestModel:
    trees: list[_PackedTree]
    bootstrap_counts: np.ndarray          # (T, n) in-bag multiplicities
    m: int
    config: ForestConfig
    class_vocab: tuple[int, ...]
    n_features: int = 0
    feat_gain: np.ndarray = field(repr=False, default=None)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class ForestDiagnostics:
    e_tree: float
    rho: float
    bound: float


def resolve_max_features(spec: str | float | None, d: int) -> int:
    if spec is None or spec == "none":
        return d
    if spec == "sqrt":
        return max(1, int(np.sqrt(d)))
    if spec == "log2":
        return max(1, int(np.log2(d)))
    frac = float(spec)
    if not (0.0 < frac <= 1.0):
        raise ValueError(f"max_features fraction out of (0, 1]: {frac}")
    return max(1, int(frac * d))


def _validate_config(config: ForestConfig):
    if config.n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {config.n_trees}")
    if config.max_depth < 1 or config.min_samples_split < 2 or config.min_samples_leaf < 1:
        raise ValueError("invalid tree limits in config")
    if config.criterion not in _CRITERIA:
        raise ValueError(f"unknown criterion {config.criterion!r}")


def _prepare(X, y, weights):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if weights is None:
        weights = np.ones(y.size, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    vocab = tuple(int(c) for c in np.unique(y))
    lookup = {c: i for i, c in enumerate(vocab)}
    yi = np.array([lookup[int(v)] for v in y], dtype=np.int64)
    return X, yi, weights, vocab


def _presort(X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    order = np.empty((d, X.shape[0]), dtype=np.int32)
    for f in range(d):
        order[f] = np.argsort(X[:, f], kind="stable").astype(np.int32)
    return order


def _grow(X, yi, weights, mult, global_order, n_classes, config, m, seed):
    if mult is None:
        order = global_order.copy()
        mult_arr = np.ones(X.shape[0], dtype=np.int64)
    else:
        mult_arr = mult
        active = mult_arr > 0
        order = np.empty((X.shape[1], int(active.sum())), dtype=np.int32)
        for f in range(X.shape[1]):
            lane = global_order[f]
            order[f] = lane[active[lane]]
    out = _kernels.grow_cart(X, yi, weights, mult_arr, order, n_classes,
                             config.max_depth, config.min_samples_split,
                             config.min_samples_leaf, m,
                             _CRITERIA[config.criterion], seed)
    _, feature, threshold, left, right, posterior, node_weight, feat_gain = out
    return _PackedTree(feature, threshold, left, right, posterior, node_weight), feat_gain


def fit_cart(X, y, weights=None, config: ForestConfig | None = None) -> TreeNode:
    """Grow one exact CART on all rows and return its root node."""
    config = config or ForestConfig(n_trees=1, bootstrap=False)
    _validate_config(config)
    X, yi, weights, vocab = _prepare(X, y, weights)
    m = resolve_max_features(config.max_features, X.shape[1])
    seed = int(np.random.SeedSequence([config.seed, 0]).generate_state(1)[0])
    packed, _ = _grow(X, yi, weights, None, _presort(X), len(vocab), config, m, seed)
    return packed.to_node()


def fit_random_forest(X, y, weights=None, config: ForestConfig | None = None) -> ForestModel:
    """Fit T exact CARTs on bootstrap replicas with per-node feature subsets."""
    config = config or ForestConfig()
    _validate_config(config)
    X, yi, weights, vocab = _prepare(X, y, weights)
    n, d = X.shape
    m = resolve_max_features(config.max_features, d)
    global_order = _presort(X)

    trees = []
    counts = np.empty((config.n_trees, n), dtype=np.int32)
    gain_total = np.zeros(d, dtype=np.float64)
    for t in range(config.n_trees):
        ss = np.random.SeedSequence([config.seed, t])
        kernel_seed = int(ss.generate_state(1)[0])
        if config.bootstrap:
            rng = np.random.default_rng(ss)
            mult = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
        else:
            mult = np.ones(n, dtype=np.int64)
        packed, feat_gain = _grow(X, yi, weights, mult, global_order,
                                  len(vocab), config, m, kernel_seed)
        trees.append(packed)
        counts[t] = mult
        gain_total += feat_gain

    return ForestModel(trees=trees, bootstrap_counts=counts, m=m,
                       config=config, class_vocab=vocab, n_features=d,
                       feat_gain=gain_total)


def predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean of per-tree leaf posteriors; rows sum to 1."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ValueError(f"predict_proba: {X.shape[1]} features, model has {model.n_features}")
    acc = np.zeros((X.shape[0], len(model.class_vocab)), dtype=np.float64)
    for tree in model.trees:
        acc += tree.posterior[tree.leaf_ids(X)]
    return acc / len(model.trees)


def oob_error(model: ForestModel, X, y, return_detail: bool = False):
    """Misclassification rate using only trees whose bootstrap excluded a row."""
    if not model.config.bootstrap:
        raise ValueError("oob_error requires bootstrap=True")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    acc = np.zeros((n, len(model.class_vocab)), dtype=np.float64)
    votes = np.zeros(n, dtype=np.int64)
    for t, tree in enumerate(model.trees):
        oob = model.bootstrap_counts[t] == 0
        if not oob.any():
            continue
        acc[oob] += tree.posterior[tree.leaf_ids(X[oob])]
        votes[oob] += 1
    covered = votes > 0
    classes = np.asarray(model.class_vocab)
    pred = classes[np.argmax(acc[covered], axis=1)]
    err = float((pred != y[covered]).mean()) if covered.any() else float("nan")
    if return_detail:
        return err, int(covered.sum()), int(n - covered.sum())
    return err


def mdi_importance(model: ForestModel) -> np.ndarray:
    """Summed weighted impurity decrease per feature, normalized to unit sum."""
    total = model.feat_gain.sum()
    if total <= 0:
        return np.full(model.feat_gain.size, 1.0 / model.feat_gain.size)
    return model.feat_gain / total


def rf_error_bound(e_tree: float, rho: float, n_trees: int) -> float:
    """Generalization-bound diagnostic: E_tree*(1-rho)/T + rho*E_tree."""
    return e_tree * (1.0 - rho) / n_trees + rho * e_tree


def forest_diagnostics(model: ForestModel, X, y) -> ForestDiagnostics:
    """Mean per-tree OOB error, mean pairwise correctness correlation, bound."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.asarray(model.class_vocab)
    n = X.shape[0]
    t_count = model.n_trees

    correct = np.zeros((t_count, n), dtype=np.float64)
    oob_mask = model.bootstrap_counts == 0
    errors = []
    for t, tree in enumerate(model.trees):
        pred = classes[np.argmax(tree.posterior[tree.leaf_ids(X)], axis=1)]
        correct[t] = pred == y
        if oob_mask[t].any():
            errors.append(float((pred[oob_mask[t]] != y[oob_mask[t]]).mean()))
    e_tree = float(np.mean(errors)) if errors else float("nan")

    rhos = []
    for a in range(t_count):
        for b in range(a + 1, t_count):
            both = oob_mask[a] & oob_mask[b]
            if both.sum() < 2:
                continue
            ca, cb = correct[a, both], correct[b, both]
            if ca.std() == 0 or cb.std() == 0:
                continue
            rhos.append(float(np.corrcoef(ca, cb)[0, 1]))
    rho = float(np.mean(rhos)) if rhos else 0.0
    return ForestDiagnostics(e_tree=e_tree, rho=rho,
                             bound=rf_error_bound(e_tree, rho, t_count))


def model_to_json(model: ForestModel) -> str:
    """Self-describing JSON dump of every tree, for audit purposes."""
    payload = {
        "n_trees": model.n_trees,
        "m": model.m,
        "class_vocab": list(model.class_vocab),
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_samples_split": model.config.min_samples_split,
            "min_samples_leaf": model.config.min_samples_leaf,
            "max_features": model.config.max_features,
            "bootstrap": model.config.bootstrap,
            "criterion": model.config.criterion,
            "seed": model.config.seed,
        },
        "trees": [t.to_node().to_dict() for t in model.trees],
    }
    return json.dumps(payload, sort_keys=True)
