import numpy as np
import pytest
from scipy import ndimage

from surfseg.learn.naf import (NAFError, PatchSample, extract_patch_samples,
                               naf_distance, _pairwise_rho,
                               naf_probability_map, sample_patch_centers,
                               train_naf)
from surfseg.mesh import VOIBox
from surfseg.volume import Volume3


def _slab_world(seed=0, dims=(28, 28, 28), noise=1.5):
    """Cartilage = a wavy slab; intensity is bright on the structure."""
    rng = np.random.default_rng(seed)
    ii, jj, kk = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    mid = dims[2] / 2 + 2.0 * np.sin(ii / 4.0) + 1.5 * np.cos(jj / 5.0)
    labels = (np.abs(kk - mid) < 3.0).astype(np.uint8)
    data = 10.0 + 40.0 * labels + rng.normal(0, noise, size=dims)
    v = Volume3(data=data.astype(np.float32), spacing=np.full(3, 0.5),
                origin=np.zeros(3))
    return v, labels


def test_naf_distance_counts_mismatches():
    a = PatchSample(center=np.zeros(3, int),
                    intensity=np.zeros((3, 3, 3), np.float32),
                    label=np.zeros((3, 3, 3), np.uint8))
    b = PatchSample(center=np.zeros(3, int),
                    intensity=np.zeros((3, 3, 3), np.float32),
                    label=np.zeros((3, 3, 3), np.uint8))
    b.label[0, 0, 0] = 1
    b.label[2, 2, 2] = 1
    assert naf_distance(a, a) == 0
    assert naf_distance(a, b) == 2
    c = PatchSample(center=np.zeros(3, int),
                    intensity=np.zeros((5, 5, 5), np.float32),
                    label=np.zeros((5, 5, 5), np.uint8))
    with pytest.raises(NAFError):
        naf_distance(a, c)


def test_pairwise_rho_matches_scalar_distance():
    rng = np.random.default_rng(3)
    labs = (rng.uniform(size=(6, 27)) > 0.5).astype(np.float64)
    idx = np.arange(6)
    rho = _pairwise_rho(labs, idx)
    for i in range(6):
        for j in range(6):
            assert rho[i, j] == np.count_nonzero(labs[i] != labs[j])


def test_patch_sample_validation():
    with pytest.raises(NAFError):
        PatchSample(center=np.zeros(3, int),
                    intensity=np.zeros((4, 3, 3), np.float32),
                    label=np.zeros((4, 3, 3), np.uint8))
    with pytest.raises(NAFError):
        PatchSample(center=np.zeros(3, int),
                    intensity=np.zeros((3, 3, 3), np.float32),
                    label=np.zeros((3, 3, 5), np.uint8))


def test_sample_patch_centers_positions():
    _v, labels = _slab_world()
    rng = np.random.default_rng(4)
    centers = sample_patch_centers(labels, 40, 40, (5, 5, 5), rng, band=3)
    pos = centers[:40]
    neg = centers[40:]
    assert all(labels[tuple(c)] == 1 for c in pos)
    assert all(labels[tuple(c)] == 0 for c in neg)
    # negatives stay within the dilation band of the structure
    band = ndimage.binary_dilation(labels.astype(bool), iterations=3)
    assert all(band[tuple(c)] for c in neg)
    with pytest.raises(NAFError):
        sample_patch_centers(np.zeros((8, 8, 8), np.uint8), 5, 5,
                             (3, 3, 3), rng)


def test_extract_patch_samples_congruent():
    v, labels = _slab_world()
    rng = np.random.default_rng(5)
    centers = sample_patch_centers(labels, 10, 10, (5, 5, 5), rng)
    samples = extract_patch_samples(v, labels, centers, (5, 5, 5))
    for s, c in zip(samples, centers):
        assert s.intensity.shape == (5, 5, 5)
        sl = tuple(slice(k - 2, k + 3) for k in c)
        assert np.array_equal(s.label, labels[sl])
        assert np.allclose(s.intensity, v.data[sl])


def _train_world_model(seed=0):
    patch = (5, 5, 5)
    samples = []
    for s in range(2):
        v, labels = _slab_world(seed=seed + s)
        rng = np.random.default_rng(seed + 10 + s)
        centers = sample_patch_centers(labels, 150, 150, patch, rng)
        samples += extract_patch_samples(v, labels, centers, patch)
    return train_naf(samples, trees=8, patches_per_tree=300,
                     seed=seed, depth_cap=8), patch


def test_naf_retrieval_beats_corpus_mean():
    # routed leaf labels must be much closer to the truth (in the l0 patch
    # metric) than a random corpus patch would be
    model, patch = _train_world_model()
    v, labels = _slab_world(seed=7)
    rng = np.random.default_rng(8)
    centers = sample_patch_centers(labels, 60, 60, patch, rng)
    test_samples = extract_patch_samples(v, labels, centers, patch)
    labs = np.stack([s.label for s in test_samples]
                    ).reshape(len(test_samples), -1).astype(np.float64)
    corpus_mean = _pairwise_rho(labs, np.arange(len(labs))).mean()

    prob = naf_probability_map(model, v)
    dists = []
    for s in test_samples:
        sl = tuple(slice(k - 2, k + 3) for k in s.center)
        pred = (prob.data[sl] >= 0.5).astype(np.uint8)
        dists.append(np.count_nonzero(pred != s.label))
    assert np.mean(dists) <= 0.5 * corpus_mean


def test_naf_probability_map_shape_and_range():
    model, _patch = _train_world_model(seed=1)
    v, labels = _slab_world(seed=9)
    roi = VOIBox(lo=np.array([2.0, 2.0, 2.0]), hi=np.array([11.0, 11.0, 11.0]))
    prob = naf_probability_map(model, v, roi=roi)
    assert prob.data.shape == v.data.shape
    assert prob.data.min() >= 0.0 and prob.data.max() <= 1.0
    # structure voxels inside the ROI score higher than background
    core = (slice(6, 20),) * 3
    on = prob.data[core][labels[core] == 1]
    off = prob.data[core][labels[core] == 0]
    assert on.mean() > off.mean() + 0.3


def test_train_naf_rejects_empty():
    with pytest.raises(NAFError):
        train_naf([])
