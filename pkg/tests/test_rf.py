import numpy as np
import pytest

from surfseg.learn.rf import (ClusteredRFModel, RFError, _gather,
                              rf_node_probabilities, train_clustered_rf,
                              train_forest)


def _separable(n=400, f=6, seed=0, margin=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, f))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
    X[y == 1, 0] += margin
    X[y == 0, 0] -= margin
    return X, y


def test_forest_learns_separable_problem():
    X, y = _separable()
    forest = train_forest(X, y, trees=15, seed=1)
    assert forest.oob_accuracy > 0.9
    vf = forest.vote_fraction(X)
    assert np.mean((vf >= 0.5) == y) > 0.95
    assert vf.min() >= 0.0 and vf.max() <= 1.0


def test_forest_deterministic_given_seed():
    X, y = _separable(seed=2)
    a = train_forest(X, y, trees=5, seed=7)
    b = train_forest(X, y, trees=5, seed=7)
    p = np.random.default_rng(0).normal(size=(50, X.shape[1]))
    assert np.array_equal(a.vote_fraction(p), b.vote_fraction(p))


def test_forest_rejects_single_class():
    X = np.zeros((10, 3))
    with pytest.raises(RFError):
        train_forest(X, np.ones(10, dtype=np.int64))


def _clustered_training(seed=0):
    # two clusters with opposite decision rules, so per-cluster forests
    # must do better than any single pooled rule
    rng = np.random.default_rng(seed)
    C, size, F = 12, 8, 5
    feats = rng.normal(size=(C, size, F))
    col_obj = np.zeros(C, dtype=np.int64)
    col_clu = (np.arange(C) % 2).astype(np.int64)
    labels = np.zeros((C, size), dtype=np.int64)
    for c in range(C):
        sign = 1.0 if col_clu[c] == 0 else -1.0
        labels[c] = (sign * feats[c, :, 0] > 0).astype(np.int64)
        feats[c, :, 0] += sign * (2 * labels[c] - 1) * 1.5
    return col_obj, col_clu, feats, labels


def test_gather_groups_by_object_and_cluster():
    col_obj, col_clu, feats, labels = _clustered_training()
    groups = _gather([(col_obj, col_clu, feats, labels)])
    assert set(groups) == {(0, 0), (0, 1)}
    n0 = (col_clu == 0).sum() * feats.shape[1]
    assert groups[(0, 0)][0].shape == (n0, feats.shape[2])
    assert groups[(0, 0)][1].shape == (n0,)


def test_clustered_rf_routes_to_cluster_forest():
    training = [_clustered_training(seed=s) for s in range(2)]
    model = train_clustered_rf(training, trees_per_forest=12, seed=3)
    assert set(model.forests) == {(0, 0), (0, 1)}
    col_obj, col_clu, feats, labels = _clustered_training(seed=9)
    prob = rf_node_probabilities(model, col_obj, col_clu, feats)
    assert prob.shape == labels.shape
    assert np.mean((prob >= 0.5) == labels) > 0.9


def test_clustered_rf_missing_forest_raises():
    training = [_clustered_training(seed=s) for s in range(2)]
    model = train_clustered_rf(training, trees_per_forest=5, seed=4)
    col_obj, col_clu, feats, _labels = _clustered_training(seed=5)
    with pytest.raises(RFError):
        rf_node_probabilities(model, col_obj, col_clu + 5, feats)


def test_clustered_rf_names_degenerate_clusters():
    col_obj, col_clu, feats, labels = _clustered_training()
    labels[col_clu == 1] = 0
    with pytest.raises(RFError, match=r"\(0, 1\)"):
        train_clustered_rf([(col_obj, col_clu, feats, labels)])
