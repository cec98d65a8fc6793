"""Evaluation suite: weighted/macro F1, one-vs-rest AUC, MCC, Brier, confusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsReport", "confusion_matrix", "weighted_f1", "macro_f1",
    "macro_auc_ovr", "mcc_multiclass", "brier_multiclass", "compute_report",
]


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    macro_auc: float
    mcc: float
    brier: float
    per_class: dict[int, dict[str, float]]
    confusion: np.ndarray
    class_vocab: tuple[int, ...]

    def scalar_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "macro_auc": self.macro_auc,
            "mcc": self.mcc,
            "brier": self.brier,
        }

    def to_dict(self) -> dict:
        d = self.scalar_dict()
        d["per_class"] = {str(k): v for k, v in self.per_class.items()}
        d["confusion"] = self.confusion.tolist()
        d["class_vocab"] = list(self.class_vocab)
        return d

    def csv_row(self, model: str, dataset: str, phase: str) -> str:
        """One summary-table row: Model,Dataset,Phase,Accuracy,...,Brier."""
        return ",".join([
            model, dataset, phase,
            f"{self.accuracy:.4f}", f"{self.macro_f1:.4f}", f"{self.weighted_f1:.4f}",
            f"{self.macro_auc:.4f}", f"{self.mcc:.4f}", f"{self.brier:.4f}",
        ])


def _as_index(labels, vocab) -> np.ndarray:
    vocab = list(vocab)
    lookup = {int(c): i for i, c in enumerate(vocab)}
    try:
        return np.array([lookup[int(v)] for v in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc} outside class vocabulary {vocab}") from None


def confusion_matrix(y_true, y_pred, class_vocab) -> np.ndarray:
    """Counts with true classes as rows, predicted as columns, ordered by vocab."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("confusion_matrix: length mismatch")
    c = len(class_vocab)
    ti = _as_index(y_true, class_vocab)
    pi = _as_index(y_pred, class_vocab)
    flat = np.bincount(ti * c + pi, minlength=c * c)
    return flat.reshape(c, c)


def _precision_recall_f1(cm: np.ndarray):
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    tp = np.diag(cm).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    return precision, recall, f1, support


def weighted_f1(y_true, y_pred, class_vocab) -> float:
    """Support-weighted mean of per-class F1; P+R = 0 contributes F1 = 0."""
    cm = confusion_matrix(y_true, y_pred, class_vocab)
    _, _, f1, support = _precision_recall_f1(cm)
    n = support.sum()
    if n == 0:
        raise ValueError("weighted_f1: empty input")
    return float((support * f1).sum() / n)


def macro_f1(y_true, y_pred, class_vocab) -> float:
    """Unweighted mean of per-class F1 over classes present in y_true."""
    cm = confusion_matrix(y_true, y_pred, class_vocab)
    _, _, f1, support = _precision_recall_f1(cm)
    present = support > 0
    if not present.any():
        raise ValueError("macro_f1: empty input")
    return float(f1[present].mean())


def _auc_rank(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC with average-rank tie handling."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int(positive.sum())
    n_neg = scores.size - n_pos
    rank_sum = ranks[positive].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auc_ovr(y_true, proba, class_vocab) -> float:
    """Mean one-vs-rest AUC over classes having both positives and negatives."""
    y_true = np.asarray(y_true)
    proba = np.asarray(proba, dtype=np.float64)
    ti = _as_index(y_true, class_vocab)
    aucs = []
    for ci in range(len(class_vocab)):
        positive = ti == ci
        n_pos = int(positive.sum())
        if n_pos == 0 or n_pos == y_true.size:
            continue
        aucs.append(_auc_rank(proba[:, ci], positive))
    if not aucs:
        raise ValueError("macro_auc_ovr: no class with both positives and negatives")
    return float(np.mean(aucs))


def mcc_multiclass(confusion) -> float:
    """Generalized MCC (R_K covariance form); 0 when a variance term vanishes."""
    cm = np.asarray(confusion, dtype=np.float64)
    if cm.size == 0:
        raise ValueError("mcc_multiclass: empty confusion")
    t = cm.sum(axis=1)            # true counts
    p = cm.sum(axis=0)            # predicted counts
    s = cm.sum()
    c = np.trace(cm)
    cov_tp = c * s - p @ t
    cov_pp = s * s - p @ p
    cov_tt = s * s - t @ t
    if cov_pp <= 0 or cov_tt <= 0:
        return 0.0
    return float(cov_tp / np.sqrt(cov_pp * cov_tt))


def brier_multiclass(y_true, proba, class_vocab) -> float:
    """Mean squared distance between probability rows and one-hot truth, range [0, 2]."""
    y_true = np.asarray(y_true)
    proba = np.asarray(proba, dtype=np.float64)
    ti = _as_index(y_true, class_vocab)
    onehot = np.zeros_like(proba)
    onehot[np.arange(y_true.size), ti] = 1.0
    return float(((proba - onehot) ** 2).sum(axis=1).mean())


def compute_report(y_true, y_pred, proba, class_vocab) -> MetricsReport:
    """All metrics in one pass from labels, hard predictions, and probabilities."""
    cm = confusion_matrix(y_true, y_pred, class_vocab)
    precision, recall, f1, support = _precision_recall_f1(cm)
    n = support.sum()
    present = support > 0
    per_class = {
        int(c): {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(support[i]),
        }
        for i, c in enumerate(class_vocab)
    }
    return MetricsReport(
        accuracy=float(np.trace(cm) / n),
        macro_f1=float(f1[present].mean()),
        weighted_f1=float((support * f1).sum() / n),
        macro_auc=macro_auc_ovr(y_true, proba, class_vocab),
        mcc=mcc_multiclass(cm),
        brier=brier_multiclass(y_true, proba, class_vocab),
        per_class=per_class,
        confusion=cm,
        class_vocab=tuple(int(c) for c in class_vocab),
    )
