"""Hyperparameter studies: search spaces, random sampling, median pruning."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from . import boost, forest
from .data import Dataset, class_counts
from .metrics import compute_report, weighted_f1
from .resample import (apply_standardizer, fit_standardizer,
                       inverse_frequency_weights, smote_tomek)

__all__ = [
    "FAMILIES", "ParamSpec", "SearchSpace", "TrialRecord", "StudyResult",
    "MedianPruner", "StudyError", "default_space", "sample_params",
    "median_prune_decision", "run_study", "build_model", "expand_proba",
]

FAMILIES = (
    "forest",
    "gbdt_first_order",
    "gbdt_second_order_xgb_like",
    "gbdt_second_order_goss_like",
    "gbdt_oblivious_like",
)


class StudyError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str                        # int | real | log_real | categorical
    low: float | None = None
    high: float | None = None
    choices: tuple | None = None

    def sample(self, rng: np.random.Generator):
        if self.kind == "int":
            return int(rng.integers(int(self.low), int(self.high) + 1))
        if self.kind == "real":
            return float(rng.uniform(self.low, self.high))
        if self.kind == "log_real":
            return float(np.exp(rng.uniform(np.log(self.low), np.log(self.high))))
        if self.kind == "categorical":
            return self.choices[int(rng.integers(0, len(self.choices)))]
        raise ValueError(f"unknown kind {self.kind!r}")


@dataclass(frozen=True)
class SearchSpace:
    model_family: str
    params: tuple[ParamSpec, ...]
    default_trials: int

    def spec(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass
class TrialRecord:
    trial_id: int
    params: dict
    seed: int
    intermediate: list[float] = field(default_factory=list)
    fold_metrics: list[dict] = field(default_factory=list)
    status: str = "running"           # complete | pruned | failed
    final_score: float | None = None
    wall_time: float = 0.0
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id, "params": self.params, "seed": self.seed,
            "intermediate": self.intermediate, "fold_metrics": self.fold_metrics,
            "status": self.status, "final_score": self.final_score,
            "error": self.error,
        }


@dataclass
class StudyResult:
    trials: list[TrialRecord]
    best_trial: TrialRecord
    budget: int
    seed: int
    fold_records: list[dict]

    def to_dict(self) -> dict:
        return {
            "budget": self.budget, "seed": self.seed,
            "best_trial_id": self.best_trial.trial_id,
            "trials": [t.to_dict() for t in self.trials],
            "fold_records": self.fold_records,
        }

    def curve_rows(self) -> list[tuple[int, int, float, str]]:
        """(trial, step, value, status) rows for tuning-curve plots."""
        rows = []
        for t in self.trials:
            for step, value in enumerate(t.intermediate):
                rows.append((t.trial_id, step, value, t.status))
        return rows

    def write_curve_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("trial,step,value,status\n")
            for trial, step, value, status in self.curve_rows():
                fh.write(f"{trial},{step},{value!r},{status}\n")


# ---------------------------------------------------------------------------
# search spaces
# ---------------------------------------------------------------------------

def default_space(model_family: str) -> SearchSpace:
    """Published search grid for one model family."""
    cw = ParamSpec("class_weight", "categorical", choices=("balanced", "none"))
    vf = ParamSpec("validation_fraction", "real", 0.10, 0.20)
    if model_family == "forest":
        params = (
            ParamSpec("n_estimators", "int", 200, 1000),
            ParamSpec("max_depth", "int", 10, 30),
            ParamSpec("min_samples_leaf", "int", 1, 15),
            ParamSpec("min_samples_split", "int", 2, 20),
            ParamSpec("bootstrap", "categorical", choices=(True, False)),
            ParamSpec("max_features_mode", "categorical", choices=("sqrt", "log2", "fraction")),
            ParamSpec("max_features_fraction", "real", 0.3, 1.0),
            ParamSpec("criterion", "categorical", choices=("gini", "entropy", "log_loss")),
            cw,
        )
        return SearchSpace(model_family, params, default_trials=200)
    if model_family == "gbdt_first_order":
        params = (
            ParamSpec("n_estimators", "int", 100, 600),
            ParamSpec("max_depth", "int", 8, 14),
            ParamSpec("learning_rate", "log_real", 0.005, 0.4),
            ParamSpec("subsample", "real", 0.70, 1.00),
            ParamSpec("min_samples_leaf", "int", 1, 8),
            ParamSpec("min_samples_split", "int", 2, 15),
            ParamSpec("max_features_mode", "categorical", choices=("sqrt", "log2", "none")),
            cw, vf,
        )
        return SearchSpace(model_family, params, default_trials=120)
    if model_family == "gbdt_second_order_xgb_like":
        params = (
            ParamSpec("n_estimators", "int", 200, 800),
            ParamSpec("max_depth", "int", 6, 12),
            ParamSpec("learning_rate", "log_real", 0.01, 0.20),
            ParamSpec("subsample", "real", 0.70, 1.00),
            ParamSpec("colsample", "real", 0.60, 1.00),
            ParamSpec("gamma", "real", 0.0, 10.0),
            ParamSpec("min_child_weight", "int", 1, 15),
            ParamSpec("reg_alpha", "real", 0.0, 2.0),
            ParamSpec("reg_lambda", "real", 1.0, 15.0),
            cw, vf,
        )
        return SearchSpace(model_family, params, default_trials=200)
    if model_family == "gbdt_second_order_goss_like":
        params = (
            ParamSpec("n_estimators", "int", 300, 1500),
            ParamSpec("max_depth", "int", 10, 20),
            ParamSpec("learning_rate", "real", 0.005, 0.50),
            ParamSpec("min_samples_leaf", "int", 5, 200),
            ParamSpec("feature_fraction", "real", 0.40, 1.00),
            ParamSpec("num_leaves", "int", 100, 500),
            ParamSpec("lambda_l1", "real", 0.0, 10.0),
            ParamSpec("lambda_l2", "real", 0.0, 10.0),
            ParamSpec("extra_trees", "categorical", choices=(True, False)),
            cw, vf,
        )
        return SearchSpace(model_family, params, default_trials=200)
    if model_family == "gbdt_oblivious_like":
        params = (
            ParamSpec("n_estimators", "int", 100, 500),
            ParamSpec("max_depth", "int", 6, 10),
            ParamSpec("learning_rate", "real", 0.01, 0.30),
            ParamSpec("l2_leaf_reg", "real", 1.0, 10.0),
            ParamSpec("bagging_temperature", "real", 0.1, 0.9),
            cw, vf,
        )
        return SearchSpace(model_family, params, default_trials=150)
    raise ValueError(f"unknown model family {model_family!r}")


def sample_params(space: SearchSpace, rng: np.random.Generator) -> dict:
    """One independent draw per parameter; log ranges uniform in log space."""
    return {p.name: p.sample(rng) for p in space.params}


# ---------------------------------------------------------------------------
# model construction from sampled parameters
# ---------------------------------------------------------------------------

@dataclass
class ModelHandle:
    """Family-specific fit/predict/importance adapter for one trial's params."""

    family: str
    config: object
    class_weight: str

    def fit(self, X, y):
        w = inverse_frequency_weights(y) if self.class_weight == "balanced" else None
        if self.family == "forest":
            return forest.fit_random_forest(X, y, w, self.config)
        if self.family == "gbdt_first_order":
            return boost.fit_gbm_first_order(X, y, w, self.config)
        return boost.fit_gbm_second_order(X, y, w, self.config)

    def predict_proba(self, model, X):
        if self.family == "forest":
            return forest.predict_proba(model, X)
        return boost.predict_proba(model, X)

    def importance(self, model) -> np.ndarray:
        if self.family == "forest":
            return forest.mdi_importance(model)
        return boost.gain_importance(model)


def build_model(family: str, params: dict, seed: int) -> ModelHandle:
    cw = params.get("class_weight", "none")
    if family == "forest":
        mode = params.get("max_features_mode", "sqrt")
        max_features = params.get("max_features_fraction", 1.0) if mode == "fraction" else mode
        config = forest.ForestConfig(
            n_trees=params["n_estimators"],
            max_depth=params["max_depth"],
            min_samples_split=params.get("min_samples_split", 2),
            min_samples_leaf=params.get("min_samples_leaf", 1),
            max_features=max_features,
            bootstrap=params.get("bootstrap", True),
            criterion=params.get("criterion", "gini"),
            seed=seed,
        )
        return ModelHandle(family, config, cw)
    if family == "gbdt_first_order":
        mode = params.get("max_features_mode", "none")
        config = boost.BoostConfig(
            rounds=params["n_estimators"],
            learning_rate=params["learning_rate"],
            subsample=params.get("subsample", 1.0),
            max_depth=params["max_depth"],
            min_samples_leaf=params.get("min_samples_leaf", 1),
            min_samples_split=params.get("min_samples_split", 2),
            max_features=None if mode == "none" else mode,
            lambda_reg=0.0,
            validation_fraction=params.get("validation_fraction", 0.15),
            seed=seed,
        )
        return ModelHandle(family, config, cw)
    if family == "gbdt_second_order_xgb_like":
        config = boost.BoostConfig(
            rounds=params["n_estimators"],
            learning_rate=params["learning_rate"],
            subsample=params.get("subsample", 1.0),
            column_fraction=params.get("colsample", 1.0),
            max_depth=params["max_depth"],
            min_child_weight=float(params.get("min_child_weight", 1.0)),
            gamma=params.get("gamma", 0.0),
            lambda_reg=params.get("reg_lambda", 1.0),
            alpha_reg=params.get("reg_alpha", 0.0),
            growth="level",
            validation_fraction=params.get("validation_fraction", 0.15),
            seed=seed,
        )
        return ModelHandle(family, config, cw)
    if family == "gbdt_second_order_goss_like":
        config = boost.BoostConfig(
            rounds=params["n_estimators"],
            learning_rate=params["learning_rate"],
            column_fraction=params.get("feature_fraction", 1.0),
            max_depth=params["max_depth"],
            min_samples_leaf=params.get("min_samples_leaf", 1),
            lambda_reg=params.get("lambda_l2", 0.0),
            alpha_reg=params.get("lambda_l1", 0.0),
            num_leaves=params.get("num_leaves", 31),
            growth="leaf_wise",
            goss_enabled=True,
            extra_trees=bool(params.get("extra_trees", False)),
            validation_fraction=params.get("validation_fraction", 0.15),
            seed=seed,
        )
        return ModelHandle(family, config, cw)
    if family == "gbdt_oblivious_like":
        config = boost.BoostConfig(
            rounds=params["n_estimators"],
            learning_rate=params["learning_rate"],
            max_depth=params["max_depth"],
            lambda_reg=params.get("l2_leaf_reg", 1.0),
            bagging_temperature=params.get("bagging_temperature", 0.0),
            growth="oblivious",
            validation_fraction=params.get("validation_fraction", 0.15),
            seed=seed,
        )
        return ModelHandle(family, config, cw)
    raise ValueError(f"unknown model family {family!r}")


def expand_proba(proba: np.ndarray, model_vocab, full_vocab) -> np.ndarray:
    """Place model-class probability columns into the full vocabulary order."""
    out = np.zeros((proba.shape[0], len(full_vocab)), dtype=np.float64)
    positions = {int(c): i for i, c in enumerate(full_vocab)}
    for j, c in enumerate(model_vocab):
        out[:, positions[int(c)]] = proba[:, j]
    return out


# ---------------------------------------------------------------------------
# pruning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MedianPruner:
    """Prune a trial whose step value falls below the median of prior reports."""

    min_reports: int = 5

    def decision(self, history: list[float], candidate: float) -> str:
        return median_prune_decision(history, candidate, self.min_reports)


def median_prune_decision(history, candidate: float, min_reports: int = 5) -> str:
    """'prune' iff at least ``min_reports`` prior values exist at this step and
    the candidate is strictly below their median; otherwise 'keep'."""
    history = list(history)
    if len(history) < min_reports:
        return "keep"
    return "prune" if candidate < median(history) else "keep"


# ---------------------------------------------------------------------------
# study runner
# ---------------------------------------------------------------------------

def _seed_from(*tags) -> int:
    return int(np.random.SeedSequence(list(tags)).generate_state(1)[0])


def prepare_folds(dataset_train: Dataset, fold_plan, seed: int) -> list[dict]:
    """Fold-confined preprocessing, computed once per study.

    Per fold: standardizer fitted on the training rows only, SMOTE-Tomek on
    the standardized training rows, validation rows only scaled. The output
    of this step depends on (fold, seed) alone, so trials can share it.
    """
    prepped = []
    for i, (tr, va) in enumerate(fold_plan.folds):
        X_tr = dataset_train.features[tr]
        y_tr = dataset_train.labels[tr]
        X_va = dataset_train.features[va]
        y_va = dataset_train.labels[va]
        scaler = fit_standardizer(X_tr)
        X_bal, y_bal, report = smote_tomek(
            apply_standardizer(scaler, X_tr), y_tr, seed=_seed_from(seed, 11, i))
        prepped.append({
            "fold": i,
            "train_rows": tr,
            "validation_rows": va,
            "X_bal": X_bal, "y_bal": y_bal,
            "X_val": apply_standardizer(scaler, X_va), "y_val": y_va,
            "scaler": scaler,
            "resample_report": report,
            "val_label_counts": class_counts(y_va).counts,
        })
    return prepped


def _fold_record(p) -> dict:
    return {
        "fold": p["fold"],
        "n_train": int(len(p["train_rows"])),
        "n_validation": int(len(p["validation_rows"])),
        "scaler_fit_rows": sorted(int(i) for i in p["train_rows"]),
        "val_label_counts": {str(k): v for k, v in p["val_label_counts"].items()},
        "resample_report": p["resample_report"].to_dict(),
        "scaler_means": p["scaler"].means.tolist(),
        "scaler_scales": p["scaler"].scales.tolist(),
    }


def _run_trial(trial: TrialRecord, space: SearchSpace, prepped, vocab,
               snapshot: dict[int, list[float]], pruner: MedianPruner | None):
    t0 = time.perf_counter()
    handle = build_model(space.model_family, trial.params, trial.seed)
    try:
        for step, p in enumerate(prepped):
            model = handle.fit(p["X_bal"], p["y_bal"])
            proba = expand_proba(handle.predict_proba(model, p["X_val"]),
                                 model.class_vocab, vocab)
            pred = np.asarray(vocab)[np.argmax(proba, axis=1)]
            score = weighted_f1(p["y_val"], pred, vocab)
            trial.intermediate.append(score)
            trial.fold_metrics.append(
                compute_report(p["y_val"], pred, proba, vocab).scalar_dict())
            if pruner is not None and step < len(prepped) - 1:
                if pruner.decision(snapshot.get(step, []), score) == "prune":
                    trial.status = "pruned"
                    break
        else:
            trial.status = "complete"
            trial.final_score = float(np.mean(trial.intermediate))
    except Exception as exc:                       # failed trials don't kill the study
        trial.status = "failed"
        trial.error = f"{type(exc).__name__}: {exc}"
    trial.wall_time = time.perf_counter() - t0
    return trial


def run_study(dataset_train: Dataset, fold_plan, space: SearchSpace,
              budget: int, seed: int, parallelism: int = 1,
              pruner: MedianPruner | None = MedianPruner()) -> StudyResult:
    """Random-sampling study over the fold plan with median pruning.

    Trials run in waves of ``parallelism``; the pruner consults intermediate
    values reported by earlier waves, so the result is deterministic for a
    given (seed, parallelism). parallelism=1 is the reference semantics where
    every prior trial is visible to the pruner.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    prepped = prepare_folds(dataset_train, fold_plan, seed)
    vocab = list(dataset_train.class_vocab)

    trials = []
    for t in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7, t]))
        trials.append(TrialRecord(
            trial_id=t,
            params=sample_params(space, rng),
            seed=_seed_from(seed, 13, t),
        ))

    history: dict[int, list[float]] = {}
    done: list[TrialRecord] = []
    jobs = max(1, int(parallelism))
    for wave_start in range(0, budget, jobs):
        wave = trials[wave_start:wave_start + jobs]
        snapshot = {k: list(v) for k, v in history.items()}
        if jobs == 1:
            results = [_run_trial(wave[0], space, prepped, vocab, history, pruner)]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(
                    lambda tr: _run_trial(tr, space, prepped, vocab, snapshot, pruner),
                    wave))
        for tr in results:
            for step, value in enumerate(tr.intermediate):
                history.setdefault(step, []).append(value)
            done.append(tr)

    complete = [t for t in done if t.status == "complete"]
    if not complete:
        raise StudyError("no trial completed; all pruned or failed")
    best = max(complete, key=lambda t: (t.final_score, -t.trial_id))
    return StudyResult(trials=done, best_trial=best, budget=budget, seed=seed,
                       fold_records=[_fold_record(p) for p in prepped])
