import numpy as np
import pytest

from surfseg import container
from surfseg.learn.naf import (extract_patch_samples, sample_patch_centers,
                               train_naf, naf_probability_map)
from surfseg.learn.rf import rf_node_probabilities, train_clustered_rf
from surfseg.learn.store import (load_naf_model, load_rf_model,
                                 load_voi_model, save_naf_model,
                                 save_rf_model, save_voi_model)
from surfseg.learn.voi import AdaBoostModel
from surfseg.volume import Volume3

from test_naf import _slab_world
from test_rf import _clustered_training


def test_container_round_trip(tmp_path):
    arrays = {
        "a": np.arange(12, dtype=np.int64).reshape(3, 4),
        "b": np.random.default_rng(0).normal(size=(2, 3, 4)).astype(np.float32),
        "empty": np.empty((0, 3), dtype=np.float64),
    }
    meta = {"kind": "test", "n": 3, "nested": {"x": [1, 2]}}
    path = str(tmp_path / "m.sseg")
    container.save(path, arrays, meta)
    back, back_meta = container.load(path)
    assert back_meta == meta
    for k, v in arrays.items():
        assert back[k].dtype == v.dtype
        assert np.array_equal(back[k], v)


def test_container_bytes_deterministic(tmp_path):
    arrays = {"w": np.linspace(0, 1, 100).reshape(10, 10)}
    p1, p2 = str(tmp_path / "a.sseg"), str(tmp_path / "b.sseg")
    container.save(p1, arrays, {"kind": "x"})
    container.save(p2, dict(reversed(list(arrays.items()))), {"kind": "x"})
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_container_rejects_garbage(tmp_path):
    path = str(tmp_path / "bad.sseg")
    with open(path, "wb") as f:
        f.write(b"NOPE" + b"\x00" * 64)
    with pytest.raises(container.ContainerError):
        container.load(path)


def test_voi_model_round_trip(tmp_path):
    m = AdaBoostModel(feature=np.array([0, 3, 1]),
                      threshold=np.array([0.5, -1.0, 2.0]),
                      polarity=np.array([1.0, -1.0, 1.0]),
                      alpha=np.array([0.7, 0.2, 0.1]), window_mm=12.0)
    path = str(tmp_path / "voi.sseg")
    save_voi_model(m, path)
    back = load_voi_model(path)
    X = np.random.default_rng(1).normal(size=(20, 5))
    assert np.allclose(back.decision(X), m.decision(X))
    assert back.window_mm == m.window_mm


def test_naf_model_round_trip(tmp_path):
    patch = (5, 5, 5)
    v, labels = _slab_world(seed=11, dims=(24, 24, 24))
    rng = np.random.default_rng(12)
    centers = sample_patch_centers(labels, 80, 80, patch, rng)
    samples = extract_patch_samples(v, labels, centers, patch)
    model = train_naf(samples, trees=4, patches_per_tree=120, seed=2,
                      depth_cap=6)
    path = str(tmp_path / "naf.sseg")
    save_naf_model(model, path)
    back = load_naf_model(path)
    assert back.patch_shape == model.patch_shape
    a = naf_probability_map(model, v)
    b = naf_probability_map(back, v)
    assert np.array_equal(a.data, b.data)


def test_rf_model_round_trip(tmp_path):
    training = [_clustered_training(seed=s) for s in range(2)]
    model = train_clustered_rf(training, trees_per_forest=6, seed=5)
    path = str(tmp_path / "rf.sseg")
    save_rf_model(model, path)
    back = load_rf_model(path)
    assert set(back.forests) == set(model.forests)
    assert back.n_features == model.n_features
    col_obj, col_clu, feats, _labels = _clustered_training(seed=6)
    assert np.array_equal(
        rf_node_probabilities(back, col_obj, col_clu, feats),
        rf_node_probabilities(model, col_obj, col_clu, feats))


def test_model_files_byte_identical_across_saves(tmp_path):
    training = [_clustered_training(seed=s) for s in range(2)]
    model = train_clustered_rf(training, trees_per_forest=4, seed=7)
    p1, p2 = str(tmp_path / "r1.sseg"), str(tmp_path / "r2.sseg")
    save_rf_model(model, p1)
    save_rf_model(model, p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_store_rejects_wrong_kind(tmp_path):
    m = AdaBoostModel(feature=np.array([0]), threshold=np.array([0.0]),
                      polarity=np.array([1.0]), alpha=np.array([1.0]))
    path = str(tmp_path / "voi.sseg")
    save_voi_model(m, path)
    with pytest.raises(container.ContainerError):
        load_naf_model(path)
    with pytest.raises(container.ContainerError):
        load_rf_model(path)
