import numpy as np
import pytest

from wineqc.data import Dataset

RED_CSV = "data/winequality-red.csv"
WHITE_CSV = "data/winequality-white.csv"


@pytest.fixture(scope="session")
def red_csv():
    return RED_CSV


@pytest.fixture(scope="session")
def white_csv():
    return WHITE_CSV


def make_blobs(n_per_class, centers, spread, seed, d=None):
    """Gaussian class blobs usable as a quick separable classification task."""
    rng = np.random.default_rng(seed)
    d = d if d is not None else len(centers[0])
    X, y = [], []
    for label, center in enumerate(centers):
        pts = rng.normal(0.0, spread, size=(n_per_class, d))
        pts[:, :len(center)] += np.asarray(center)
        X.append(pts)
        y.append(np.full(n_per_class, label))
    return np.vstack(X), np.concatenate(y)


@pytest.fixture()
def blob_data():
    return make_blobs(120, [(0.0, 0.0), (4.0, 4.0)], spread=1.0, seed=3)


@pytest.fixture(scope="session")
def mini_dataset():
    """Small imbalanced 3-class table shaped like the wine data."""
    rng = np.random.default_rng(11)
    sizes = {4: 18, 5: 90, 6: 60}
    rows, labels = [], []
    for label, size in sizes.items():
        base = rng.normal(label, 0.8, size=(size, 4))
        base[:, 3] = rng.normal(0, 1, size)          # uninformative column
        rows.append(base)
        labels += [label] * size
    X = np.vstack(rows)
    y = np.asarray(labels, dtype=np.int64)
    perm = rng.permutation(y.size)
    return Dataset(
        features=X[perm].copy(),
        labels=y[perm].copy(),
        groups=np.arange(y.size, dtype=np.int64),
        feature_names=("alpha", "beta", "gamma", "noise"),
    )


@pytest.fixture(scope="session")
def mini_csv(tmp_path_factory, mini_dataset):
    path = tmp_path_factory.mktemp("mini") / "mini.csv"
    header = ";".join(list(mini_dataset.feature_names) + ["quality"])
    lines = [header]
    for row, label in zip(mini_dataset.features, mini_dataset.labels):
        lines.append(";".join(f"{v:.6f}" for v in row) + f";{label}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)
