import numpy as np
import pytest

from wineqc.data import class_counts
from wineqc.resample import (Standardizer, _tomek_filter, apply_standardizer,
                             fit_standardizer, imbalance_ratio,
                             inverse_frequency_weights, smote_oversample,
                             smote_tomek, tomek_links)
from oracles import on_segment_of_same_class, tomek_links_brute


# ---------------------------------------------------------------------------
# standardizer
# ---------------------------------------------------------------------------

def test_standardizer_column_statistics():
    s = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
    assert s.means[0] == pytest.approx(2.0)
    assert s.scales[0] == pytest.approx(np.std([1.0, 2.0, 3.0]))


def test_standardizer_constant_column_guard():
    X = np.array([[4.0, 1.0], [4.0, 2.0], [4.0, 3.0]])
    s = fit_standardizer(X)
    assert s.scales[0] == 1.0
    out = apply_standardizer(s, X)
    np.testing.assert_allclose(out[:, 0], 0.0)


def test_standardizer_fit_data_recentred():
    rng = np.random.default_rng(0)
    X = rng.normal(5.0, 3.0, size=(200, 6))
    s = fit_standardizer(X)
    out = apply_standardizer(s, X)
    assert np.abs(out.mean(axis=0)).max() < 1e-9
    np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-9)


def test_standardizer_identity():
    s = Standardizer(means=np.zeros(2), scales=np.ones(2))
    X = np.array([[1.0, -2.0], [0.5, 3.0]])
    np.testing.assert_array_equal(apply_standardizer(s, X), X)


def test_standardizer_validation_keeps_shift():
    rng = np.random.default_rng(1)
    train = rng.normal(0.0, 1.0, size=(100, 3))
    val = rng.normal(2.0, 1.0, size=(50, 3))
    out = apply_standardizer(fit_standardizer(train), val)
    assert np.all(np.abs(out.mean(axis=0)) > 0.5)


def test_standardizer_round_trip():
    rng = np.random.default_rng(2)
    X = rng.normal(3.0, 2.5, size=(50, 4))
    s = fit_standardizer(X)
    back = apply_standardizer(s, X) * s.scales + s.means
    np.testing.assert_allclose(back, X, atol=1e-12)


def test_standardizer_ignores_other_rows():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    s1 = fit_standardizer(X[:50])
    X2 = X.copy()
    X2[50:] += 100.0                     # perturb rows outside the fit set
    s2 = fit_standardizer(X2[:50])
    np.testing.assert_array_equal(s1.means, s2.means)
    np.testing.assert_array_equal(s1.scales, s2.scales)


def test_standardizer_errors():
    with pytest.raises(ValueError):
        fit_standardizer(np.empty((0, 2)))
    with pytest.raises(ValueError):
        apply_standardizer(fit_standardizer(np.ones((3, 2))), np.ones((3, 3)))


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------

def test_smote_interpolation_matches_formula():
    # replay the generator stream and evaluate the interpolation by hand
    X = np.array([[0.0, 0.0], [2.0, 4.0], [10.0, 10.0], [12.0, 14.0]])
    y = np.array([0, 0, 1, 1])
    seed, deficit = 123, 3
    syn_X, syn_y = smote_oversample(X, y, {0: 2 + deficit, 1: 2}, k_max=5, seed=seed)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(2)
    base = perm[np.arange(deficit) % 2]
    lam = rng.random(deficit)
    _ = rng.integers(0, 1, size=deficit)     # neighbour picks (k=1)
    nb = 1 - base                            # each point's only neighbour
    expected = X[base] + lam[:, None] * (X[nb] - X[base])
    np.testing.assert_allclose(syn_X, expected, atol=1e-12)
    assert np.all(syn_y == 0)


def test_smote_singleton_class_duplicates():
    X = np.array([[0.0], [1.0], [5.0]])
    y = np.array([0, 0, 1])
    syn_X, syn_y = smote_oversample(X, y, {1: 3}, seed=0)
    np.testing.assert_array_equal(syn_X, [[5.0], [5.0]])
    assert list(syn_y) == [1, 1]


def test_smote_counts_match_targets_exactly():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 3))
    y = np.array([0] * 40 + [1] * 15 + [2] * 5)
    targets = {0: 40, 1: 40, 2: 40}
    syn_X, syn_y = smote_oversample(X, y, targets, seed=9)
    merged = class_counts(np.concatenate([y, syn_y]))
    assert merged.counts == targets


def test_smote_geometry_brute_force():
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(0, 1, (30, 3)), rng.normal(5, 1, (12, 3))])
    y = np.array([0] * 30 + [1] * 12)
    syn_X, syn_y = smote_oversample(X, y, {0: 30, 1: 30}, seed=21)
    for point, label in zip(syn_X, syn_y):
        assert on_segment_of_same_class(point, X[y == label], tol=1e-9)


def test_smote_deterministic():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 2))
    y = np.array([0] * 30 + [1] * 10)
    a = smote_oversample(X, y, {1: 30}, seed=4)[0]
    b = smote_oversample(X, y, {1: 30}, seed=4)[0]
    np.testing.assert_array_equal(a, b)


def test_smote_target_below_count_errors():
    X = np.zeros((4, 1))
    y = np.array([0, 0, 0, 1])
    with pytest.raises(ValueError):
        smote_oversample(X, y, {0: 2}, seed=0)


# ---------------------------------------------------------------------------
# Tomek links
# ---------------------------------------------------------------------------

def test_tomek_links_1d_example():
    X = np.array([[0.0], [0.1], [5.0], [5.1]])
    y = np.array([0, 1, 1, 0])
    assert tomek_links(X, y) == [(0, 1), (2, 3)]


def test_tomek_links_separated_clusters():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (20, 2))])
    y = np.array([0] * 20 + [1] * 20)
    assert tomek_links(X, y) == []


def test_tomek_links_match_brute_force():
    rng = np.random.default_rng(13)
    for trial in range(5):
        n = int(rng.integers(10, 100))
        X = rng.normal(size=(n, 3))
        y = rng.integers(0, 3, n)
        if np.unique(y).size < 2:
            continue
        assert tomek_links(X, y) == tomek_links_brute(X, y)


def test_tomek_links_errors():
    with pytest.raises(ValueError):
        tomek_links(np.zeros((1, 2)), np.array([0]))
    with pytest.raises(ValueError):
        tomek_links(np.zeros((3, 2)), np.array([1, 1, 1]))


def test_tomek_filter_deletes_larger_class_only():
    y = np.array([0, 1, 0, 1])
    links = [(0, 1), (2, 3)]
    assert _tomek_filter(y, links, {0: 10, 1: 4}) == {0, 2}
    assert _tomek_filter(y, links, {0: 4, 1: 10}) == {1, 3}
    assert _tomek_filter(y, links, {0: 5, 1: 5}) == set()


# ---------------------------------------------------------------------------
# combined resampling
# ---------------------------------------------------------------------------

def test_smote_tomek_equalizes_to_majority():
    rng = np.random.default_rng(17)
    X = np.vstack([rng.normal(0, 1, (50, 2)), rng.normal(4, 1, (12, 2)),
                   rng.normal(-4, 1, (6, 2))])
    y = np.array([0] * 50 + [1] * 12 + [2] * 6)
    Xb, yb, report = smote_tomek(X, y, seed=2)
    counts = class_counts(yb).counts
    assert report.counts_before.counts == {0: 50, 1: 12, 2: 6}
    assert report.ir_before == pytest.approx(50 / 6)
    assert report.ir_after <= 1.10
    assert min(counts.values()) / sum(counts.values()) >= 0.8 / 3
    assert report.ir_improvement == pytest.approx(report.ir_before / report.ir_after)
    assert Xb.shape[0] == yb.size == sum(counts.values())


def test_smote_tomek_balanced_separated_is_noop():
    rng = np.random.default_rng(19)
    X = np.vstack([rng.normal(0, 0.2, (20, 2)), rng.normal(8, 0.2, (20, 2))])
    y = np.array([0] * 20 + [1] * 20)
    Xb, yb, report = smote_tomek(X, y, seed=3)
    assert report.synthetic_count == 0
    assert report.tomek_removed == 0
    assert report.ir_after == 1.0
    np.testing.assert_array_equal(Xb, X)


def test_smote_tomek_deterministic():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(70, 3))
    y = np.array([0] * 50 + [1] * 20)
    a = smote_tomek(X, y, seed=5)[0]
    b = smote_tomek(X, y, seed=5)[0]
    np.testing.assert_array_equal(a, b)


def test_smote_tomek_single_class_errors():
    with pytest.raises(ValueError):
        smote_tomek(np.zeros((5, 2)), np.ones(5, dtype=int), seed=0)


# ---------------------------------------------------------------------------
# weights and imbalance ratio
# ---------------------------------------------------------------------------

def test_weights_balanced_classes_are_unit():
    w = inverse_frequency_weights(np.array([0, 0, 1, 1]))
    np.testing.assert_allclose(w, 1.0)


def test_weights_formula_example():
    w = inverse_frequency_weights(np.array([0, 0, 0, 1]))
    np.testing.assert_allclose(w, [2 / 3, 2 / 3, 2 / 3, 2.0])


def test_weights_sum_to_n():
    rng = np.random.default_rng(29)
    for _ in range(10):
        y = rng.integers(0, 5, size=int(rng.integers(3, 200)))
        assert inverse_frequency_weights(y).sum() == pytest.approx(y.size)


def test_weights_empty_errors():
    with pytest.raises(ValueError):
        inverse_frequency_weights(np.array([]))


def test_imbalance_ratio():
    assert imbalance_ratio(class_counts([0, 0, 1, 1])) == 1.0
    assert imbalance_ratio(class_counts([0] * 10 + [1] * 2)) == 5.0
