"""End-to-end experiment: split, tune, refit, select, evaluate, report, audit."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .data import Dataset, load_csv, class_counts
from .metrics import compute_report
from .resample import apply_standardizer, fit_standardizer, smote_tomek
from .split import stratified_holdout, stratified_group_kfold
from .tune import (MedianPruner, build_model, default_space, expand_proba,
                   run_study, _seed_from)

__all__ = [
    "ExperimentConfig", "SelectionResult", "ExperimentReport", "StageError",
    "TestPartitionGuard", "run_experiment", "select_features", "emit_report",
    "profile_stage", "load_report", "verify_artifacts",
]

CSV_HEADER = "Model,Dataset,Phase,Accuracy,Macro-F1,Weighted-F1,Macro-AUC,MCC,Brier"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[stage={stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str
    color: str                       # red | white
    model_family: str
    trials: int = 30
    folds: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    top_k: int = 5
    min_importance: float = 0.05
    out_dir: str | None = None
    jobs: int = 1
    prune: bool = True
    phase: str = "both"              # full | selected | both
    selected_budget_factor: float = 1.0
    delimiter: str = ";"
    label_column: str = "quality"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SelectionResult:
    ranked: tuple[tuple[str, float], ...]
    chosen: tuple[str, ...]
    phase: str

    def to_dict(self) -> dict:
        return {"ranked": [[n, v] for n, v in self.ranked],
                "chosen": list(self.chosen), "phase": self.phase}


@dataclass
class ExperimentReport:
    config: dict
    phases: dict[str, dict]
    audit: dict
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Deterministic payload; wall-clock timings stay out of it."""
        return {"config": self.config, "phases": self.phases, "audit": self.audit}

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentReport":
        return ExperimentReport(config=payload["config"], phases=payload["phases"],
                                audit=payload["audit"])


class TestPartitionGuard:
    """Holds the untouched test rows and records every batch read."""

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        self._X = features.copy()
        self._y = labels.copy()
        self._X.setflags(write=False)
        self._y.setflags(write=False)
        self.reads: list[dict] = []

    def read(self, phase: str, after_tuning: bool):
        self.reads.append({
            "phase": phase,
            "sequence": len(self.reads),
            "after_tuning": bool(after_tuning),
            "n_rows": int(self._y.size),
            "label_counts": {str(k): v for k, v in class_counts(self._y).counts.items()},
        })
        return self._X, self._y


def profile_stage(label: str, action, *args, **kwargs):
    """Run the action under a monotonic clock; returns (result, seconds)."""
    t0 = time.perf_counter()
    result = action(*args, **kwargs)
    return result, time.perf_counter() - t0


def select_features(importances, names, top_k: int, min_importance: float,
                    phase: str = "full") -> SelectionResult:
    """Rank by importance (ties keep original order), keep up to top_k above
    the cutoff; if nothing qualifies the single top feature is kept."""
    imp = np.asarray(importances, dtype=np.float64)
    if abs(imp.sum() - 1.0) > 1e-6:
        raise ValueError(f"importances must sum to 1, got {imp.sum()}")
    order = np.argsort(-imp, kind="stable")
    ranked = tuple((names[i], float(imp[i])) for i in order)
    chosen = [names[i] for i in order[:top_k] if imp[i] >= min_importance]
    if not chosen:
        chosen = [names[order[0]]]
    return SelectionResult(ranked=ranked, chosen=tuple(chosen), phase=phase)


def _cv_stats(fold_metrics: list[dict]) -> dict:
    keys = fold_metrics[0].keys()
    out = {}
    for k in keys:
        vals = np.array([m[k] for m in fold_metrics], dtype=np.float64)
        out[k] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def _run_phase(phase: str, train_ds: Dataset, plan, config: ExperimentConfig,
               guard: TestPartitionGuard, full_vocab, test_columns,
               budget: int, timings: dict):
    """Tune on the folds, refit the winner on the whole training portion,
    evaluate the held-out test rows exactly once."""
    phase_seed = _seed_from(config.seed, 31, 1 if phase == "full" else 2)
    space = default_space(config.model_family)
    pruner = MedianPruner() if config.prune else None

    def _study():
        return run_study(train_ds, plan, space, budget, phase_seed,
                         parallelism=config.jobs, pruner=pruner)

    study, t_study = profile_stage(f"study_{phase}", _study)
    timings[f"study_{phase}"] = t_study
    best = study.best_trial

    def _refit():
        scaler = fit_standardizer(train_ds.features)
        X_bal, y_bal, refit_report = smote_tomek(
            apply_standardizer(scaler, train_ds.features), train_ds.labels,
            seed=_seed_from(phase_seed, 17))
        handle = build_model(config.model_family, best.params, best.seed)
        model = handle.fit(X_bal, y_bal)
        return scaler, handle, model, refit_report

    (scaler, handle, model, refit_report), t_refit = profile_stage(f"refit_{phase}", _refit)
    timings[f"refit_{phase}"] = t_refit

    def _evaluate():
        X_test_full, y_test = guard.read(phase=phase, after_tuning=True)
        X_test = apply_standardizer(scaler, X_test_full[:, test_columns])
        proba = expand_proba(handle.predict_proba(model, X_test),
                             model.class_vocab, full_vocab)
        pred = np.asarray(full_vocab)[np.argmax(proba, axis=1)]
        return compute_report(y_test, pred, proba, full_vocab)

    test_metrics, t_eval = profile_stage(f"test_eval_{phase}", _evaluate)
    timings[f"test_eval_{phase}"] = t_eval

    importance = handle.importance(model)
    phase_payload = {
        "model_family": config.model_family,
        "budget": budget,
        "best_trial_id": best.trial_id,
        "best_params": best.params,
        "best_seed": best.seed,
        "cv_metrics": _cv_stats(best.fold_metrics),
        "fold_scores": best.intermediate,
        "test_metrics": test_metrics.to_dict(),
        "importances": {n: float(v) for n, v in
                        zip(train_ds.feature_names, importance)},
        "fold_preprocessing": study.fold_records,
        "refit_resample_report": refit_report.to_dict(),
        "study": {
            "n_trials": len(study.trials),
            "n_complete": sum(t.status == "complete" for t in study.trials),
            "n_pruned": sum(t.status == "pruned" for t in study.trials),
            "n_failed": sum(t.status == "failed" for t in study.trials),
            "trials": [t.to_dict() for t in study.trials],
            "curve": [list(r) for r in study.curve_rows()],
        },
    }
    return phase_payload, importance


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Execute the full benchmark in fixed order and assemble the report."""
    timings: dict[str, float] = {}

    def staged(stage, fn, *args, **kwargs):
        try:
            result, dt = profile_stage(stage, fn, *args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc
        timings[stage] = dt
        return result

    ds = staged("load", load_csv, config.data_path,
                delimiter=config.delimiter, label_column=config.label_column)
    holdout = staged("holdout", stratified_holdout, ds, config.test_fraction, config.seed)
    guard = TestPartitionGuard(ds.features[holdout.test_indices],
                               ds.labels[holdout.test_indices])
    train_ds = Dataset(
        features=ds.features[holdout.train_indices].copy(),
        labels=ds.labels[holdout.train_indices].copy(),
        groups=ds.groups[holdout.train_indices].copy(),
        feature_names=ds.feature_names,
    )
    plan = staged("fold_plan", stratified_group_kfold,
                  train_ds.labels, train_ds.groups, config.folds, config.seed)

    full_vocab = list(ds.class_vocab)
    all_columns = np.arange(ds.d)
    phases: dict[str, dict] = {}

    def _full_phase():
        return _run_phase("full", train_ds, plan, config, guard, full_vocab,
                          all_columns, config.trials, timings)

    full_payload, full_importance = staged("phase_full", _full_phase)

    selection = staged(
        "selection", select_features, full_importance,
        list(train_ds.feature_names), config.top_k, config.min_importance)
    full_payload["selection"] = selection.to_dict()
    if config.phase in ("full", "both"):
        phases["full"] = full_payload

    if config.phase in ("selected", "both"):
        chosen = list(selection.chosen)
        test_columns = np.array([ds.feature_names.index(n) for n in chosen])
        train_sel = train_ds.select_features(chosen)
        sel_budget = max(1, int(round(config.trials * config.selected_budget_factor)))

        def _selected_phase():
            payload, _ = _run_phase("selected", train_sel, plan, config, guard,
                                    full_vocab, test_columns, sel_budget, timings)
            return payload

        sel_payload = staged("phase_selected", _selected_phase)
        sel_payload["selection"] = selection.to_dict()
        phases["selected"] = sel_payload

    audit = {
        "holdout": {
            "n": ds.n,
            "train_rows": [int(i) for i in holdout.train_indices],
            "test_rows": [int(i) for i in holdout.test_indices],
            "test_label_counts": {str(k): v for k, v in
                                  class_counts(ds.labels[holdout.test_indices]).counts.items()},
        },
        "folds": [
            {
                "fold": i,
                "train_rows": [int(holdout.train_indices[p]) for p in tr],
                "validation_rows": [int(holdout.train_indices[p]) for p in va],
                "validation_groups": sorted(int(g) for g in train_ds.groups[va]),
                "val_label_counts": {str(k): v for k, v in
                                     class_counts(train_ds.labels[va]).counts.items()},
            }
            for i, (tr, va) in enumerate(plan.folds)
        ],
        "fold_plan_seed": plan.seed,
        "test_reads": guard.reads,
    }

    return ExperimentReport(config=config.to_dict(), phases=phases,
                            audit=audit, timings=timings)


# ---------------------------------------------------------------------------
# emission and artifact auditing
# ---------------------------------------------------------------------------

def _csv_rows(report: ExperimentReport) -> list[str]:
    rows = [CSV_HEADER]
    for phase in ("full", "selected"):
        if phase not in report.phases:
            continue
        p = report.phases[phase]
        m = p["test_metrics"]
        rows.append(",".join([
            p["model_family"], report.config["color"], phase,
            f"{m['accuracy']:.4f}", f"{m['macro_f1']:.4f}", f"{m['weighted_f1']:.4f}",
            f"{m['macro_auc']:.4f}", f"{m['mcc']:.4f}", f"{m['brier']:.4f}",
        ]))
    return rows


def _summary_md(report: ExperimentReport) -> str:
    cfg = report.config
    lines = [
        f"# Wine quality benchmark: {cfg['model_family']} on {cfg['color']}",
        "",
        f"- data: `{cfg['data_path']}`",
        f"- trials: {cfg['trials']}, folds: {cfg['folds']}, seed: {cfg['seed']}",
        "",
        "## Test metrics",
        "",
        "| Phase | Accuracy | Macro-F1 | Weighted-F1 | Macro-AUC | MCC | Brier |",
        "|---|---|---|---|---|---|---|",
    ]
    for phase, p in report.phases.items():
        m = p["test_metrics"]
        lines.append(
            f"| {phase} | {m['accuracy']:.4f} | {m['macro_f1']:.4f} | "
            f"{m['weighted_f1']:.4f} | {m['macro_auc']:.4f} | {m['mcc']:.4f} | "
            f"{m['brier']:.4f} |")
    lines += ["", "## Cross-validation weighted F1 (best trial)", ""]
    for phase, p in report.phases.items():
        cv = p["cv_metrics"]["weighted_f1"]
        lines.append(f"- {phase}: {cv['mean']:.4f} +/- {cv['std']:.4f}")
    lines += ["", "## Class balance after SMOTE-Tomek (fold 0)", ""]
    for phase, p in report.phases.items():
        rep = p["fold_preprocessing"][0]["resample_report"]
        lines.append(
            f"- {phase}: IR {rep['ir_before']:.2f} -> {rep['ir_after']:.2f} "
            f"(improvement {rep['ir_improvement']:.1f}x, "
            f"{rep['synthetic_count']} synthetic, {rep['tomek_removed']} removed)")
    if report.timings:
        lines += ["", "## Stage timings", "", "| Stage | Seconds |", "|---|---|"]
        for stage, dt in report.timings.items():
            lines.append(f"| {stage} | {dt:.2f} |")
    lines.append("")
    return "\n".join(lines)


def emit_report(report: ExperimentReport, out_dir, formats=("json", "csv", "markdown")) -> list[Path]:
    """Write report files; refuses to write anything for an empty report."""
    if not report.phases:
        raise ValueError("emit_report: report has no phases")
    unknown = set(formats) - {"json", "csv", "markdown", "md"}
    if unknown:
        raise ValueError(f"emit_report: unknown formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if "json" in formats:
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        written.append(path)
        if report.timings:
            tpath = out / "timings.json"
            tpath.write_text(json.dumps(report.timings, indent=1, sort_keys=True))
            written.append(tpath)
        folds_dir = out / "folds"
        folds_dir.mkdir(exist_ok=True)
        for fold in report.audit["folds"]:
            payload = dict(fold)
            payload["phases"] = {}
            for phase, p in report.phases.items():
                payload["phases"][phase] = p["fold_preprocessing"][fold["fold"]]
            fpath = folds_dir / f"fold_{fold['fold']}.json"
            fpath.write_text(json.dumps(payload, indent=1, sort_keys=True))
            written.append(fpath)
        for phase, name in (("full", "study.csv"), ("selected", "study_selected.csv")):
            if phase not in report.phases:
                continue
            spath = out / name
            with open(spath, "w") as fh:
                fh.write("trial,step,value,status\n")
                for trial, step, value, status in report.phases[phase]["study"]["curve"]:
                    fh.write(f"{trial},{step},{value!r},{status}\n")
            written.append(spath)

    if "csv" in formats:
        path = out / "report.csv"
        path.write_text("\n".join(_csv_rows(report)) + "\n")
        written.append(path)

    if "markdown" in formats or "md" in formats:
        path = out / "summary.md"
        path.write_text(_summary_md(report))
        written.append(path)

    return written


def load_report(out_dir) -> ExperimentReport:
    payload = json.loads((Path(out_dir) / "report.json").read_text())
    return ExperimentReport.from_dict(payload)


def verify_artifacts(out_dir) -> list[str]:
    """Re-verify leakage invariants from the serialized run artifacts."""
    out = Path(out_dir)
    failures = []
    try:
        report = load_report(out)
    except Exception as exc:
        return [f"cannot load report.json: {exc}"]

    audit = report.audit
    train_rows = set(audit["holdout"]["train_rows"])
    test_rows = set(audit["holdout"]["test_rows"])
    if train_rows & test_rows:
        failures.append("holdout train and test rows overlap")
    if len(train_rows) + len(test_rows) != audit["holdout"]["n"]:
        failures.append("holdout does not cover the dataset")

    seen_groups: dict[int, int] = {}
    covered = set()
    for fold in audit["folds"]:
        tr = set(fold["train_rows"])
        va = set(fold["validation_rows"])
        if tr & va:
            failures.append(f"fold {fold['fold']}: train/validation overlap")
        if (tr | va) != train_rows:
            failures.append(f"fold {fold['fold']}: does not cover the training rows")
        covered |= va
        for g in fold["validation_groups"]:
            if g in seen_groups:
                failures.append(
                    f"group {g} validates in folds {seen_groups[g]} and {fold['fold']}")
            seen_groups[g] = fold["fold"]
    if covered != train_rows:
        failures.append("validation folds do not cover every training row")

    # positions within the training portion map through the ordered holdout list
    position_to_row = audit["holdout"]["train_rows"]
    for fold in audit["folds"]:
        fpath = out / "folds" / f"fold_{fold['fold']}.json"
        if not fpath.exists():
            failures.append(f"missing artifact {fpath.name}")
            continue
        payload = json.loads(fpath.read_text())
        for phase, prep in payload.get("phases", {}).items():
            fit_rows = {position_to_row[p] for p in prep["scaler_fit_rows"]}
            if fit_rows != set(fold["train_rows"]):
                failures.append(
                    f"fold {fold['fold']} {phase}: scaler fit rows differ from the fold's training rows")
            if prep["val_label_counts"] != fold["val_label_counts"]:
                failures.append(
                    f"fold {fold['fold']} {phase}: validation label multiset changed")

    per_phase = {}
    for read in audit["test_reads"]:
        per_phase.setdefault(read["phase"], []).append(read)
        if not read["after_tuning"]:
            failures.append(f"test read in phase {read['phase']} before tuning")
        if read["label_counts"] != audit["holdout"]["test_label_counts"]:
            failures.append(f"test label multiset changed in phase {read['phase']}")
    for phase in report.phases:
        reads = per_phase.get(phase, [])
        if len(reads) != 1:
            failures.append(f"phase {phase}: expected exactly 1 test read, saw {len(reads)}")
    return failures
