import numpy as np
import pytest

from wineqc.data import class_counts, Dataset
from wineqc.split import stratified_group_kfold
from wineqc.tune import (FAMILIES, MedianPruner, ParamSpec, StudyError,
                         build_model, default_space, expand_proba,
                         median_prune_decision, prepare_folds, run_study,
                         sample_params)


def _plan_for(dataset, k=3, seed=0):
    return stratified_group_kfold(dataset.labels, dataset.groups, k, seed)


# ---------------------------------------------------------------------------
# search spaces and sampling
# ---------------------------------------------------------------------------

def test_forest_space_matches_published_grid():
    space = default_space("forest")
    n_est = space.spec("n_estimators")
    assert (n_est.kind, n_est.low, n_est.high) == ("int", 200, 1000)
    depth = space.spec("max_depth")
    assert (depth.low, depth.high) == (10, 30)
    assert space.spec("criterion").choices == ("gini", "entropy", "log_loss")
    assert space.default_trials == 200


def test_second_order_space_log_learning_rate():
    space = default_space("gbdt_second_order_xgb_like")
    lr = space.spec("learning_rate")
    assert lr.kind == "log_real"
    assert (lr.low, lr.high) == (0.01, 0.20)
    assert space.spec("gamma").high == 10.0
    assert space.spec("reg_lambda").low == 1.0


def test_every_family_has_class_weight_choice():
    for family in FAMILIES:
        space = default_space(family)
        assert space.spec("class_weight").choices == ("balanced", "none")


def test_unknown_family_errors():
    with pytest.raises(ValueError):
        default_space("svm")


def test_sampled_values_respect_bounds():
    space = default_space("forest")
    rng = np.random.default_rng(0)
    for _ in range(1000):
        params = sample_params(space, rng)
        assert 10 <= params["max_depth"] <= 30
        assert 200 <= params["n_estimators"] <= 1000
        assert params["class_weight"] in ("balanced", "none")


def test_log_uniform_median():
    spec = ParamSpec("lr", "log_real", 0.005, 0.5)
    rng = np.random.default_rng(1)
    draws = [spec.sample(rng) for _ in range(10_000)]
    expected = float(np.sqrt(0.005 * 0.5))
    assert np.median(draws) == pytest.approx(expected, rel=0.2)


def test_sampling_deterministic():
    space = default_space("gbdt_first_order")
    a = sample_params(space, np.random.default_rng(7))
    b = sample_params(space, np.random.default_rng(7))
    assert a == b


# ---------------------------------------------------------------------------
# pruner
# ---------------------------------------------------------------------------

def test_pruner_empty_history_keeps():
    assert median_prune_decision([], 0.1) == "keep"


def test_pruner_below_median_prunes():
    assert median_prune_decision([0.5, 0.6, 0.7], 0.4, min_reports=3) == "prune"


def test_pruner_equal_to_median_keeps():
    assert median_prune_decision([0.5, 0.6, 0.7], 0.6, min_reports=3) == "keep"


def test_pruner_respects_min_reports():
    assert median_prune_decision([0.9, 0.9, 0.9, 0.9], 0.0) == "keep"
    assert median_prune_decision([0.9] * 5, 0.0) == "prune"


# ---------------------------------------------------------------------------
# model handles
# ---------------------------------------------------------------------------

def test_build_model_every_family(mini_dataset):
    rng = np.random.default_rng(3)
    X = mini_dataset.features[:80]
    y = mini_dataset.labels[:80]
    for family in FAMILIES:
        space = default_space(family)
        params = sample_params(space, rng)
        params["n_estimators"] = 4
        handle = build_model(family, params, seed=1)
        model = handle.fit(X, y)
        proba = handle.predict_proba(model, X)
        assert proba.shape == (80, np.unique(y).size)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        imp = handle.importance(model)
        assert imp.shape == (X.shape[1],)
        assert imp.sum() == pytest.approx(1.0, abs=1e-9)


def test_expand_proba_places_columns():
    proba = np.array([[0.3, 0.7]])
    out = expand_proba(proba, model_vocab=(5, 7), full_vocab=(4, 5, 6, 7))
    np.testing.assert_allclose(out, [[0.0, 0.3, 0.0, 0.7]])


# ---------------------------------------------------------------------------
# study runner
# ---------------------------------------------------------------------------

def _study(mini_dataset, budget=3, seed=0, family="forest", parallelism=1,
           pruner=MedianPruner()):
    plan = _plan_for(mini_dataset)
    space = default_space(family)
    # shrink tree counts so studies stay fast
    params = tuple(ParamSpec("n_estimators", "int", 5, 15) if p.name == "n_estimators"
                   else p for p in space.params)
    space = type(space)(space.model_family, params, space.default_trials)
    return run_study(mini_dataset, plan, space, budget, seed,
                     parallelism=parallelism, pruner=pruner)


def test_single_trial_study(mini_dataset):
    result = _study(mini_dataset, budget=1)
    assert len(result.trials) == 1
    assert result.best_trial.trial_id == 0
    assert result.best_trial.status == "complete"
    assert result.best_trial.final_score == pytest.approx(
        np.mean(result.best_trial.intermediate))


def test_no_pruning_gives_full_intermediates(mini_dataset):
    result = _study(mini_dataset, budget=4, pruner=None)
    for trial in result.trials:
        assert trial.status == "complete"
        assert len(trial.intermediate) == 3


def test_pruned_trials_have_partial_intermediates(mini_dataset):
    result = _study(mini_dataset, budget=10, seed=3,
                    pruner=MedianPruner(min_reports=2))
    pruned = [t for t in result.trials if t.status == "pruned"]
    for trial in pruned:
        assert len(trial.intermediate) < 3
        assert trial.final_score is None
    complete = [t for t in result.trials if t.status == "complete"]
    best = max(complete, key=lambda t: t.final_score)
    assert result.best_trial.final_score == best.final_score


def test_study_deterministic_serial(mini_dataset):
    a = _study(mini_dataset, budget=4, seed=5)
    b = _study(mini_dataset, budget=4, seed=5)
    assert a.to_dict() == b.to_dict()


def test_study_deterministic_with_threads(mini_dataset):
    a = _study(mini_dataset, budget=4, seed=6, parallelism=2)
    b = _study(mini_dataset, budget=4, seed=6, parallelism=2)
    assert a.to_dict() == b.to_dict()


def test_fold_preprocessing_cache_is_leak_free(mini_dataset):
    plan = _plan_for(mini_dataset)
    prepped = prepare_folds(mini_dataset, plan, seed=0)
    tr, va = plan.folds[0]

    # scaler statistics must not move when validation rows are perturbed
    perturbed = Dataset(
        features=mini_dataset.features.copy(),
        labels=mini_dataset.labels.copy(),
        groups=mini_dataset.groups.copy(),
        feature_names=mini_dataset.feature_names,
    )
    feats = perturbed.features.copy()
    feats.setflags(write=True)
    feats[va] += 50.0
    perturbed = Dataset(features=feats, labels=perturbed.labels.copy(),
                        groups=perturbed.groups.copy(),
                        feature_names=perturbed.feature_names)
    prepped2 = prepare_folds(perturbed, plan, seed=0)
    np.testing.assert_array_equal(prepped[0]["scaler"].means,
                                  prepped2[0]["scaler"].means)
    np.testing.assert_array_equal(prepped[0]["X_bal"], prepped2[0]["X_bal"])

    # validation rows keep their original label multiset and row count
    assert prepped[0]["val_label_counts"] == class_counts(mini_dataset.labels[va]).counts
    assert prepped[0]["X_val"].shape[0] == va.size


def test_study_budget_validation(mini_dataset):
    with pytest.raises(ValueError):
        _study(mini_dataset, budget=0)


def test_curve_rows_structure(mini_dataset):
    result = _study(mini_dataset, budget=2)
    rows = result.curve_rows()
    assert all(len(r) == 4 for r in rows)
    trial_ids = {r[0] for r in rows}
    assert trial_ids == {0, 1}
