import numpy as np
import pytest
from scipy import ndimage

from conftest import small_params
from surfseg.graph import straight_column_graph
from surfseg.learn.features import (FEATURE_NAMES, N_FEATURES, _derivative,
                                    _hessian_eigenvalues, _local_moments,
                                    extract_features, feature_volumes)
from surfseg.volume import Volume3


def _vol(data, spacing=(0.5, 0.5, 0.5)):
    return Volume3(data=np.asarray(data, dtype=np.float64),
                   spacing=np.asarray(spacing), origin=np.zeros(3))


def _smooth_random(shape=(20, 18, 16), seed=0):
    rng = np.random.default_rng(seed)
    return ndimage.gaussian_filter(rng.normal(size=shape), 2.0,
                                   mode="nearest")


def test_feature_name_table():
    assert N_FEATURES == 30
    assert len(set(FEATURE_NAMES)) == 30


def test_derivative_against_finite_differences():
    # independent oracle: smooth first, then difference the smoothed field
    # with an unrelated stencil (numpy gradient of the filtered data)
    data = _smooth_random()
    v = _vol(data, spacing=(0.5, 0.4, 0.6))
    for ax in range(3):
        order = [0, 0, 0]
        order[ax] = 1
        got = _derivative(data, v, 1.0, order)
        sm = ndimage.gaussian_filter(data, 1.0 / v.spacing, mode="nearest")
        want = np.gradient(sm, v.spacing[ax], axis=ax)
        assert np.max(np.abs(got - want)) < 1e-3


def test_derivative_annihilates_constants():
    data = np.full((12, 12, 12), 7.5)
    v = _vol(data)
    for order in ([1, 0, 0], [0, 2, 0], [1, 1, 0]):
        assert np.max(np.abs(_derivative(data, v, 0.7, order))) < 1e-10


def test_hessian_eigenvalues_on_quadratic():
    # f = a x^2 + b y^2 + c z^2 has constant Hessian diag(2a, 2b, 2c)
    nx = ny = nz = 17
    sp = 0.5
    x = (np.arange(nx) - nx // 2) * sp
    y = (np.arange(ny) - ny // 2) * sp
    z = (np.arange(nz) - nz // 2) * sp
    gx, gy, gz = np.meshgrid(x, y, z, indexing="ij")
    a, b, c = 1.0, -0.5, 2.0
    data = a * gx**2 + b * gy**2 + c * gz**2
    v = _vol(data, spacing=(sp, sp, sp))
    eig = _hessian_eigenvalues(data, v, 0.5)
    core = eig[6:-6, 6:-6, 6:-6]         # away from boundary effects
    want = np.sort([2 * a, 2 * b, 2 * c])[::-1]
    assert np.max(np.abs(core - want)) < 1e-3


def test_local_moments_scalar_oracle():
    rng = np.random.default_rng(2)
    data = rng.uniform(1.0, 3.0, size=(11, 11, 11))
    v = _vol(data)
    m1, var, skew, kurt = _local_moments(data, v)
    # window size: 2.0 mm / 0.5 mm -> 4 -> forced odd = 5
    k = 5
    h = k // 2
    p = np.array([5, 5, 5])
    w = data[p[0]-h:p[0]+h+1, p[1]-h:p[1]+h+1, p[2]-h:p[2]+h+1].ravel()
    mu = w.mean()
    vv = ((w - mu) ** 2).mean()
    sk = ((w - mu) ** 3).mean() / vv**1.5
    ku = ((w - mu) ** 4).mean() / vv**2 - 3.0
    idx = tuple(p)
    assert abs(m1[idx] - mu) < 1e-9
    assert abs(var[idx] - vv) < 1e-9
    assert abs(skew[idx] - sk) < 1e-9
    assert abs(kurt[idx] - ku) < 1e-9


def test_local_moments_constant_region():
    data = np.full((9, 9, 9), 4.0)
    v = _vol(data)
    m1, var, skew, kurt = _local_moments(data, v)
    assert np.allclose(m1, 4.0, atol=1e-12)
    assert np.all(var < 1e-12)
    assert np.all(skew == 0) and np.all(kurt == 0)


def test_feature_volumes_count_and_shape():
    data = _smooth_random((14, 14, 14), seed=3)
    v = _vol(data)
    naf = _vol(np.clip(data + 0.5, 0, 1))
    vols = feature_volumes(v, naf)
    assert len(vols) == 28
    assert all(f.shape == data.shape for f in vols)
    with pytest.raises(ValueError):
        feature_volumes(v, _vol(np.zeros((5, 5, 5))))


def test_extract_features_shape_and_column_gradients():
    data = _smooth_random((16, 16, 16), seed=4)
    v = _vol(data)
    naf = _vol(np.clip(np.abs(data), 0, 1))
    g = straight_column_graph(4, small_params(column_size=7),
                              origin=(3.0, 3.0, 3.0), grid_step=0.5)
    feats = extract_features(v, naf, g)
    assert feats.shape == (4, 7, 30)
    assert np.all(np.isfinite(feats))
    # the two column-domain features are per-mm gradients of the sampled
    # naf / intensity profiles
    naf_idx = FEATURE_NAMES.index("naf")
    want = np.gradient(feats[:, :, naf_idx], g.params.node_spacing, axis=1)
    assert np.allclose(feats[:, :, 28], want, atol=1e-9)
