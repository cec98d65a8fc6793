import numpy as np
import pytest

from wineqc.data import Dataset, load_csv
from wineqc.split import FoldPlan, stratified_group_kfold, stratified_holdout


def _tiny_dataset(labels):
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(
        features=np.arange(labels.size, dtype=np.float64)[:, None].copy(),
        labels=labels.copy(),
        groups=np.arange(labels.size, dtype=np.int64),
        feature_names=("x",),
    )


def test_red_holdout_sizes(red_csv):
    ds = load_csv(red_csv)
    split = stratified_holdout(ds, 0.2, seed=0)
    assert split.test_indices.size == 320
    assert split.train_indices.size == 1279


def test_holdout_per_class_within_one_sample(red_csv):
    ds = load_csv(red_csv)
    split = stratified_holdout(ds, 0.2, seed=5)
    for c in ds.class_vocab:
        total = int((ds.labels == c).sum())
        in_test = int((ds.labels[split.test_indices] == c).sum())
        assert abs(in_test - total * 0.2) <= 1.0


def test_holdout_single_class_rounding():
    ds = _tiny_dataset([4] * 10)
    split = stratified_holdout(ds, 0.2, seed=1)
    assert split.test_indices.size == 2
    assert split.train_indices.size == 8


def test_holdout_deterministic(red_csv):
    ds = load_csv(red_csv)
    a = stratified_holdout(ds, 0.2, seed=9)
    b = stratified_holdout(ds, 0.2, seed=9)
    np.testing.assert_array_equal(a.test_indices, b.test_indices)
    np.testing.assert_array_equal(a.train_indices, b.train_indices)


def test_holdout_partition(red_csv):
    ds = load_csv(red_csv)
    split = stratified_holdout(ds, 0.2, seed=2)
    merged = np.sort(np.concatenate([split.train_indices, split.test_indices]))
    np.testing.assert_array_equal(merged, np.arange(ds.n))


def test_holdout_degenerate_fraction():
    ds = _tiny_dataset([1, 1, 2, 2])
    with pytest.raises(ValueError):
        stratified_holdout(ds, 0.0, seed=0)
    with pytest.raises(ValueError):
        stratified_holdout(ds, 1.0, seed=0)


def test_kfold_balanced_two_classes():
    labels = np.array([0, 1] * 50)
    groups = np.arange(100)
    plan = stratified_group_kfold(labels, groups, k=5, seed=0)
    for tr, va in plan.folds:
        assert va.size == 20
        assert (labels[va] == 0).sum() == 10
        assert (labels[va] == 1).sum() == 10
        assert np.intersect1d(tr, va).size == 0
        assert np.union1d(tr, va).size == 100


def test_kfold_group_atomicity_adversarial():
    # one group holds all three rows of the rare class
    labels = np.array([0] * 30 + [1, 1, 1])
    groups = np.concatenate([np.arange(30), [99, 99, 99]])
    plan = stratified_group_kfold(labels, groups, k=5, seed=3)
    rare_rows = np.array([30, 31, 32])
    hit_folds = [i for i, (_, va) in enumerate(plan.folds)
                 if np.intersect1d(rare_rows, va).size > 0]
    assert len(hit_folds) == 1
    _, va = plan.folds[hit_folds[0]]
    assert np.intersect1d(rare_rows, va).size == 3


def test_kfold_every_row_validates_exactly_once():
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 3, 200)
    groups = rng.integers(0, 60, 200)
    plan = stratified_group_kfold(labels, groups, k=5, seed=4)
    seen = np.concatenate([va for _, va in plan.folds])
    np.testing.assert_array_equal(np.sort(seen), np.arange(200))


def test_kfold_no_group_spans_folds():
    rng = np.random.default_rng(8)
    labels = rng.integers(0, 4, 300)
    groups = rng.integers(0, 40, 300)
    plan = stratified_group_kfold(labels, groups, k=4, seed=8)
    for g in np.unique(groups):
        rows = np.flatnonzero(groups == g)
        hits = sum(np.intersect1d(rows, va).size > 0 for _, va in plan.folds)
        assert hits == 1


def test_kfold_deterministic():
    labels = np.tile([0, 0, 1, 2], 25)
    groups = np.arange(100)
    a = stratified_group_kfold(labels, groups, 5, seed=7)
    b = stratified_group_kfold(labels, groups, 5, seed=7)
    for (tra, vaa), (trb, vab) in zip(a.folds, b.folds):
        np.testing.assert_array_equal(vaa, vab)
        np.testing.assert_array_equal(tra, trb)


def test_kfold_unique_groups_acts_stratified(red_csv):
    ds = load_csv(red_csv)
    split = stratified_holdout(ds, 0.2, seed=0)
    labels = ds.labels[split.train_indices]
    plan = stratified_group_kfold(labels, np.arange(labels.size), 5, seed=0)
    for c in np.unique(labels):
        per_fold = [(labels[va] == c).sum() for _, va in plan.folds]
        assert max(per_fold) - min(per_fold) <= 1


def test_kfold_validation_group_share(red_csv):
    ds = load_csv(red_csv)
    split = stratified_holdout(ds, 0.2, seed=0)
    labels = ds.labels[split.train_indices]
    n_groups = labels.size
    plan = stratified_group_kfold(labels, np.arange(n_groups), 5, seed=0)
    for _, va in plan.folds:
        assert abs(va.size - n_groups / 5) <= 0.1 * (n_groups / 5)


def test_kfold_errors():
    with pytest.raises(ValueError):
        stratified_group_kfold(np.array([0, 1]), np.array([0, 0]), k=3, seed=0)
    with pytest.raises(ValueError):
        stratified_group_kfold(np.array([]), np.array([]), k=2, seed=0)


def test_fold_plan_json_round_trip():
    labels = np.tile([0, 1], 20)
    plan = stratified_group_kfold(labels, np.arange(40), 4, seed=2)
    restored = FoldPlan.from_json(plan.to_json())
    assert restored.k == plan.k and restored.seed == plan.seed
    for (tra, vaa), (trb, vab) in zip(plan.folds, restored.folds):
        np.testing.assert_array_equal(np.sort(vaa), vab)
        np.testing.assert_array_equal(np.sort(tra), trb)
