import json
import time

import numpy as np
import pytest

from wineqc.cli import main as cli_main
from wineqc.pipeline import (CSV_HEADER, ExperimentConfig, ExperimentReport,
                             emit_report, load_report, profile_stage,
                             run_experiment, select_features, verify_artifacts)


@pytest.fixture(scope="module")
def mini_run(mini_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("mini_run")
    config = ExperimentConfig(
        data_path=mini_csv, color="red", model_family="forest",
        trials=2, folds=3, seed=7, out_dir=str(out), phase="both")
    report = run_experiment(config)
    emit_report(report, out)
    return config, report, out


def test_select_features_cutoff_example():
    names = [f"f{i}" for i in range(6)]
    result = select_features([0.4, 0.3, 0.2, 0.06, 0.03, 0.01], names,
                             top_k=5, min_importance=0.05)
    assert result.chosen == ("f0", "f1", "f2", "f3")


def test_select_features_uniform_tie_break():
    names = [f"f{i}" for i in range(11)]
    result = select_features([1 / 11] * 11, names, top_k=5, min_importance=0.05)
    assert result.chosen == ("f0", "f1", "f2", "f3", "f4")


def test_select_features_singleton_fallback():
    result = select_features([0.04, 0.96], ["a", "b"], top_k=5, min_importance=0.97)
    assert result.chosen == ("b",)


def test_select_features_validates_sum():
    with pytest.raises(ValueError):
        select_features([0.5, 0.2], ["a", "b"], 5, 0.05)


def test_profile_stage_zero_work():
    result, duration = profile_stage("noop", lambda: 42)
    assert result == 42
    assert 0.0 <= duration < 0.01


def test_report_structure(mini_run):
    _, report, _ = mini_run
    assert set(report.phases) == {"full", "selected"}
    for phase in report.phases.values():
        m = phase["test_metrics"]
        for key in ("accuracy", "macro_f1", "weighted_f1", "macro_auc", "mcc", "brier"):
            assert key in m
        assert phase["best_params"]
        assert len(phase["fold_scores"]) == 3
        assert "weighted_f1" in phase["cv_metrics"]
    assert len(report.audit["folds"]) == 3
    assert len(report.audit["test_reads"]) == 2


def test_selected_phase_uses_chosen_columns(mini_run):
    _, report, _ = mini_run
    chosen = report.phases["full"]["selection"]["chosen"]
    assert 1 <= len(chosen) <= 5
    assert set(report.phases["selected"]["importances"]) == set(chosen)


def test_selection_respects_cutoff_invariant(mini_run):
    _, report, _ = mini_run
    full_imp = report.phases["full"]["importances"]
    chosen = report.phases["full"]["selection"]["chosen"]
    if len(chosen) > 1:
        for name in chosen:
            assert full_imp[name] >= 0.05


def test_csv_emission(mini_run):
    _, _, out = mini_run
    lines = (out / "report.csv").read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    assert lines[1].startswith("forest,red,full,")
    assert lines[2].startswith("forest,red,selected,")


def test_emitted_files_exist(mini_run):
    _, _, out = mini_run
    for name in ("report.json", "report.csv", "summary.md", "study.csv",
                 "study_selected.csv", "timings.json"):
        assert (out / name).exists(), name
    assert sorted(p.name for p in (out / "folds").glob("*.json")) == [
        "fold_0.json", "fold_1.json", "fold_2.json"]


def test_study_csv_schema(mini_run):
    _, _, out = mini_run
    lines = (out / "study.csv").read_text().strip().splitlines()
    assert lines[0] == "trial,step,value,status"
    assert len(lines) > 1


def test_report_json_round_trip(mini_run):
    _, report, out = mini_run
    loaded = load_report(out)
    assert loaded.to_dict() == report.to_dict()


def test_timings_not_in_report_json(mini_run):
    _, _, out = mini_run
    payload = json.loads((out / "report.json").read_text())
    assert "timings" not in payload
    assert json.loads((out / "timings.json").read_text())


def test_audit_passes_on_clean_run(mini_run):
    _, _, out = mini_run
    assert verify_artifacts(out) == []


def test_audit_detects_tampered_fold(mini_run, tmp_path):
    _, report, out = mini_run
    clone = tmp_path / "tampered"
    clone.mkdir()
    emit_report(report, clone)
    fold_path = clone / "folds" / "fold_0.json"
    payload = json.loads(fold_path.read_text())
    phase = next(iter(payload["phases"]))
    payload["phases"][phase]["val_label_counts"]["4"] = 999
    fold_path.write_text(json.dumps(payload))
    failures = verify_artifacts(clone)
    assert any("label multiset" in f for f in failures)


def test_exactly_one_test_read_per_phase_after_tuning(mini_run):
    _, report, _ = mini_run
    reads = report.audit["test_reads"]
    phases = [r["phase"] for r in reads]
    assert phases == ["full", "selected"]
    assert all(r["after_tuning"] for r in reads)


def test_empty_report_never_emits(tmp_path):
    empty = ExperimentReport(config={}, phases={}, audit={})
    target = tmp_path / "nothing"
    with pytest.raises(ValueError):
        emit_report(empty, target)
    assert not target.exists()


def test_run_is_deterministic(mini_csv, tmp_path):
    config = ExperimentConfig(data_path=mini_csv, color="red",
                              model_family="gbdt_oblivious_like",
                              trials=2, folds=3, seed=11, phase="full")
    a = run_experiment(config)
    b = run_experiment(config)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    emit_report(a, out_a, formats=("json",))
    emit_report(b, out_b, formats=("json",))
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()


def test_phase_full_only(mini_csv, tmp_path):
    config = ExperimentConfig(data_path=mini_csv, color="red", model_family="forest",
                              trials=1, folds=3, seed=2, phase="full")
    report = run_experiment(config)
    assert set(report.phases) == {"full"}
    assert len(report.audit["test_reads"]) == 1


def test_stage_error_is_tagged(tmp_path):
    config = ExperimentConfig(data_path="/missing.csv", color="red",
                              model_family="forest", trials=1)
    with pytest.raises(Exception, match=r"\[stage=load\]"):
        run_experiment(config)


def test_cli_run_report_audit(mini_csv, tmp_path, capsys):
    out = tmp_path / "cli_out"
    code = cli_main(["run", "--data", mini_csv, "--color", "red", "--model",
                     "oblivious", "--trials", "1", "--seed", "3", "--folds", "3",
                     "--out", str(out), "--phase", "full"])
    assert code == 0
    assert (out / "report.json").exists()

    assert cli_main(["report", "--in", str(out), "--format", "csv"]) == 0
    assert (out / "report.csv").exists()

    assert cli_main(["audit", "--in", str(out)]) == 0
    captured = capsys.readouterr()
    assert "audit clean" in captured.out


def test_cli_run_failure_exit_code(tmp_path, capsys):
    code = cli_main(["run", "--data", "/missing.csv", "--color", "red",
                     "--model", "forest", "--trials", "1",
                     "--out", str(tmp_path / "x")])
    assert code == 1
    assert "stage=load" in capsys.readouterr().err
