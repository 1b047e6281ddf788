"""Neighborhood approximation forest: label-space neighbors from appearance.

Trees split on cheap appearance tests but are scored in label space: a split
is good when patches inside a child have similar label patches (small mean
pairwise l0 distance) and the two children differ. Leaves store mean label
patches; averaging routed leaves yields a boundary probability map.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from ..mesh import VOIBox
from ..volume import Volume3
from .voi import box_sum, integral_volume

TEST_SUBBOX_DIFF = 0
TEST_TWO_POINT = 1
TEST_CENTER = 2

DEFAULT_TREES = 20
DEFAULT_PATCHES_PER_TREE = 2000
DEFAULT_PATCH_SHAPE = (9, 9, 9)
DEFAULT_DEPTH = 12
DEFAULT_MIN_SAMPLES = 8
N_CANDIDATES = 100
PAIR_SUBSAMPLE = 11        # 11*10/2 = 55 pairs <= the 64-pair budget
NEGATIVE_BAND_VOXELS = 5


class NAFError(Exception):
    pass


@dataclass
class PatchSample:
    """Congruent intensity/label blocks around a voxel center."""

    center: np.ndarray        # (3,) voxel index
    intensity: np.ndarray     # patch_shape, float32
    label: np.ndarray         # patch_shape, uint8 (cartilage = 1)

    def __post_init__(self):
        if self.intensity.shape != self.label.shape:
            raise NAFError("intensity and label patches must be congruent")
        if any(s % 2 == 0 for s in self.intensity.shape):
            raise NAFError("patch dims must be odd")


def naf_distance(a: PatchSample, b: PatchSample) -> int:
    """l0 distance between label patches (count of differing positions)."""
    if a.label.shape != b.label.shape:
        raise NAFError("patch dims differ")
    return int(np.count_nonzero(a.label != b.label))


def sample_patch_centers(cartilage: np.ndarray, n_pos: int, n_neg: int,
                         patch_shape, rng: np.random.Generator,
                         band: int = NEGATIVE_BAND_VOXELS):
    """Positive centers on the structure, negatives in a dilation band."""
    half = np.array(patch_shape) // 2
    interior = np.zeros_like(cartilage, dtype=bool)
    interior[half[0]:cartilage.shape[0] - half[0],
             half[1]:cartilage.shape[1] - half[1],
             half[2]:cartilage.shape[2] - half[2]] = True
    pos_mask = cartilage.astype(bool) & interior
    dilated = ndimage.binary_dilation(cartilage.astype(bool), iterations=band)
    neg_mask = dilated & ~cartilage.astype(bool) & interior
    pos = np.argwhere(pos_mask)
    neg = np.argwhere(neg_mask)
    if len(pos) == 0 or len(neg) == 0:
        raise NAFError("no positive or no band-negative centers available")
    pi = rng.choice(len(pos), size=min(n_pos, len(pos)), replace=False)
    ni = rng.choice(len(neg), size=min(n_neg, len(neg)), replace=False)
    return np.concatenate([pos[pi], neg[ni]])


def extract_patch_samples(v: Volume3, labels: np.ndarray, centers,
                          patch_shape=DEFAULT_PATCH_SHAPE) -> list[PatchSample]:
    half = np.array(patch_shape) // 2
    data = v.data.astype(np.float32)
    lab = (labels > 0).astype(np.uint8)
    out = []
    for c in np.asarray(centers):
        sl = tuple(slice(c[k] - half[k], c[k] + half[k] + 1) for k in range(3))
        out.append(PatchSample(center=c.copy(), intensity=data[sl].copy(),
                               label=lab[sl].copy()))
    return out


# -- appearance tests -------------------------------------------------------
# A test is 13 ints: [type, ax,ay,az, sx,sy,sz, bx,by,bz, tx,ty,tz] with
# patch-relative corner offsets (a, b) and subbox size s; plus a threshold.

def _random_test(rng, patch_shape):
    t = np.zeros(13, dtype=np.int64)
    kind = int(rng.integers(0, 3))
    t[0] = kind
    p = np.asarray(patch_shape)
    if kind == TEST_SUBBOX_DIFF:
        s = np.array([int(rng.integers(1, min(pk, 5) + 1)) for pk in p])
        t[4:7] = s
        t[1:4] = [int(rng.integers(0, p[k] - s[k] + 1)) for k in range(3)]
        t[7:10] = [int(rng.integers(0, p[k] - s[k] + 1)) for k in range(3)]
    elif kind == TEST_TWO_POINT:
        t[1:4] = [int(rng.integers(0, p[k])) for k in range(3)]
        t[7:10] = [int(rng.integers(0, p[k])) for k in range(3)]
    return t


def _responses_patch(test, patches):
    """Test response on materialized patches: (n,)."""
    kind = test[0]
    if kind == TEST_CENTER:
        c = np.array(patches.shape[1:]) // 2
        return patches[:, c[0], c[1], c[2]].astype(np.float64)
    a = test[1:4]
    if kind == TEST_TWO_POINT:
        b = test[7:10]
        return (patches[:, a[0], a[1], a[2]].astype(np.float64)
                - patches[:, b[0], b[1], b[2]])
    s = test[4:7]
    b = test[7:10]
    pa = patches[:, a[0]:a[0]+s[0], a[1]:a[1]+s[1], a[2]:a[2]+s[2]]
    pb = patches[:, b[0]:b[0]+s[0], b[1]:b[1]+s[1], b[2]:b[2]+s[2]]
    return pa.mean(axis=(1, 2, 3), dtype=np.float64) - pb.mean(
        axis=(1, 2, 3), dtype=np.float64)


def _responses_volume(test, data, iv, centers, half):
    """Same response computed from the volume at given centers."""
    kind = test[0]
    if kind == TEST_CENTER:
        return data[centers[:, 0], centers[:, 1], centers[:, 2]].astype(np.float64)
    corner = centers - half
    a = corner + test[1:4]
    if kind == TEST_TWO_POINT:
        b = corner + test[7:10]
        return (data[a[:, 0], a[:, 1], a[:, 2]].astype(np.float64)
                - data[b[:, 0], b[:, 1], b[:, 2]])
    s = test[4:7]
    vol = float(s.prod())
    b = corner + test[7:10]
    return (box_sum(iv, a, a + s) - box_sum(iv, b, b + s)) / vol


# -- training ---------------------------------------------------------------

@dataclass
class NAFTree:
    tests: np.ndarray        # (n_nodes, 13); type -1 marks a leaf
    threshold: np.ndarray    # (n_nodes,)
    left: np.ndarray         # (n_nodes,) child id or -1
    right: np.ndarray
    leaf_id: np.ndarray      # (n_nodes,) index into leaf_patches or -1
    leaf_patches: np.ndarray  # (n_leaves,) + patch_shape, float32 mean labels
    leaf_counts: np.ndarray


@dataclass
class NAFModel:
    patch_shape: tuple
    trees: list


def _pairwise_rho(labels_flat, idx):
    sub = labels_flat[idx]
    # |a - b|_l0 for binary patches = a.sum + b.sum - 2 a.b
    ones = sub.sum(axis=1)
    dot = sub @ sub.T
    return ones[:, None] + ones[None, :] - 2 * dot


def _grow_tree(patches, labels_flat, order, rng, patch_shape, depth_cap,
               min_samples):
    tests, thresholds, lefts, rights, leaf_ids = [], [], [], [], []
    leaf_patches, leaf_counts = [], []
    p3 = int(np.prod(patch_shape))

    def leaf(sample_idx):
        node = len(tests)
        tests.append(np.full(13, -1, dtype=np.int64))
        thresholds.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        leaf_ids.append(len(leaf_patches))
        leaf_patches.append(labels_flat[sample_idx].mean(axis=0)
                            .astype(np.float32).reshape(patch_shape))
        leaf_counts.append(len(sample_idx))
        return node

    def grow(sample_idx, depth):
        n = len(sample_idx)
        if depth >= depth_cap or n < min_samples:
            return leaf(sample_idx)
        sub = sample_idx if n <= PAIR_SUBSAMPLE else rng.choice(
            sample_idx, size=PAIR_SUBSAMPLE, replace=False)
        rho = _pairwise_rho(labels_flat, sub)
        if rho.max() == 0:       # label-identical node: splitting is useless
            return leaf(sample_idx)
        best_score, best = -1.0, None
        for _ in range(N_CANDIDATES):
            t = _random_test(rng, patch_shape)
            r = _responses_patch(t, patches[sample_idx])
            theta = float(np.median(r))
            go_left = r <= theta
            nl = int(go_left.sum())
            if nl == 0 or nl == n:
                continue
            # scatter on the subsample only
            r_sub = _responses_patch(t, patches[sub])
            sl = r_sub <= theta
            if sl.sum() < 2 or (~sl).sum() < 2:
                continue
            within = rho[np.ix_(sl, sl)].mean() + rho[np.ix_(~sl, ~sl)].mean()
            between = rho[np.ix_(sl, ~sl)].mean()
            score = between / (within + 1e-9)
            if score > best_score:
                best_score, best = score, (t, theta, go_left)
        if best is None:
            return leaf(sample_idx)
        t, theta, go_left = best
        node = len(tests)
        tests.append(t)
        thresholds.append(theta)
        lefts.append(-1)
        rights.append(-1)
        leaf_ids.append(-1)
        lefts[node] = grow(sample_idx[go_left], depth + 1)
        rights[node] = grow(sample_idx[~go_left], depth + 1)
        return node

    grow(order, 0)
    return NAFTree(tests=np.array(tests), threshold=np.array(thresholds),
                   left=np.array(lefts), right=np.array(rights),
                   leaf_id=np.array(leaf_ids),
                   leaf_patches=np.array(leaf_patches, dtype=np.float32),
                   leaf_counts=np.array(leaf_counts))


def train_naf(samples: list[PatchSample], trees: int = DEFAULT_TREES,
              patches_per_tree: int = DEFAULT_PATCHES_PER_TREE,
              seed: int = 0, depth_cap: int = DEFAULT_DEPTH,
              min_samples: int = DEFAULT_MIN_SAMPLES) -> NAFModel:
    if not samples:
        raise NAFError("empty sample list")
    patch_shape = samples[0].intensity.shape
    patches = np.stack([s.intensity for s in samples])
    labels_flat = np.stack([s.label for s in samples]).reshape(len(samples), -1
                                                               ).astype(np.float64)
    rng = np.random.default_rng(seed)
    grown = []
    for _t in range(trees):
        boot = rng.integers(0, len(samples), size=min(patches_per_tree,
                                                      len(samples)))
        grown.append(_grow_tree(patches, labels_flat, boot, rng, patch_shape,
                                depth_cap, min_samples))
    return NAFModel(patch_shape=tuple(patch_shape), trees=grown)


# -- prediction -------------------------------------------------------------

@njit(cache=True)
def _route_kernel(tests, threshold, left, right, leaf_id, data, iv,
                  centers, half):
    """Walk every center down the tree; per-node responses recomputed from
    the volume (integral volume for box tests)."""
    n = len(centers)
    out = np.empty(n, dtype=np.int64)
    for m in range(n):
        node = 0
        while leaf_id[node] < 0:
            t = tests[node]
            if t[0] == TEST_CENTER:
                r = data[centers[m, 0], centers[m, 1], centers[m, 2]]
            else:
                ax = centers[m, 0] - half[0] + t[1]
                ay = centers[m, 1] - half[1] + t[2]
                az = centers[m, 2] - half[2] + t[3]
                bx = centers[m, 0] - half[0] + t[7]
                by = centers[m, 1] - half[1] + t[8]
                bz = centers[m, 2] - half[2] + t[9]
                if t[0] == TEST_TWO_POINT:
                    r = data[ax, ay, az] - data[bx, by, bz]
                else:
                    sx, sy, sz = t[4], t[5], t[6]
                    sa = (iv[ax + sx, ay + sy, az + sz]
                          - iv[ax, ay + sy, az + sz]
                          - iv[ax + sx, ay, az + sz]
                          - iv[ax + sx, ay + sy, az]
                          + iv[ax, ay, az + sz] + iv[ax, ay + sy, az]
                          + iv[ax + sx, ay, az] - iv[ax, ay, az])
                    sb = (iv[bx + sx, by + sy, bz + sz]
                          - iv[bx, by + sy, bz + sz]
                          - iv[bx + sx, by, bz + sz]
                          - iv[bx + sx, by + sy, bz]
                          + iv[bx, by, bz + sz] + iv[bx, by + sy, bz]
                          + iv[bx + sx, by, bz] - iv[bx, by, bz])
                    r = (sa - sb) / (sx * sy * sz)
            node = left[node] if r <= threshold[node] else right[node]
        out[m] = leaf_id[node]
    return out


def _route(tree: NAFTree, data, iv, centers, half):
    """Leaf-table index for each center."""
    return _route_kernel(tree.tests, tree.threshold, tree.left, tree.right,
                         tree.leaf_id, data, iv,
                         np.ascontiguousarray(centers),
                         np.asarray(half, dtype=np.int64))


@njit(cache=True)
def _scatter_patches(acc, cnt, centers, patches, half):
    """Accumulate each patch block around its center (overlap counting)."""
    for m in range(len(centers)):
        x0 = centers[m, 0] - half[0]
        y0 = centers[m, 1] - half[1]
        z0 = centers[m, 2] - half[2]
        for i in range(patches.shape[1]):
            for j in range(patches.shape[2]):
                for k in range(patches.shape[3]):
                    acc[x0 + i, y0 + j, z0 + k] += patches[m, i, j, k]
                    cnt[x0 + i, y0 + j, z0 + k] += 1.0


def naf_probability_map(model: NAFModel, v: Volume3,
                        roi: VOIBox | None = None) -> Volume3:
    """Average routed leaf label patches into a [0,1] map (overlap-normalized).

    Voxels outside the ROI (or where no full patch fits) are 0.
    """
    dims = np.array(v.dims)
    half = np.array(model.patch_shape) // 2
    lo = half.copy()
    hi = dims - half
    if roi is not None:
        rlo = np.floor((roi.lo - v.origin) / v.spacing).astype(int)
        rhi = np.ceil((roi.hi - v.origin) / v.spacing).astype(int) + 1
        lo = np.maximum(lo, rlo)
        hi = np.minimum(hi, rhi)
    if np.any(lo >= hi):
        raise NAFError("ROI does not intersect the valid patch-center region")
    grids = np.meshgrid(*(np.arange(lo[k], hi[k]) for k in range(3)),
                        indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    data = v.data.astype(np.float64)
    iv = integral_volume(data)
    flat_leaves = [t.leaf_patches.reshape(len(t.leaf_patches), -1)
                   for t in model.trees]
    acc = np.zeros(tuple(dims), dtype=np.float64)
    cnt = np.zeros(tuple(dims), dtype=np.float64)
    chunk = 8192
    for start in range(0, len(centers), chunk):
        cs = centers[start:start + chunk]
        mean_patch = np.zeros((len(cs), flat_leaves[0].shape[1]))
        for tree, fl in zip(model.trees, flat_leaves):
            mean_patch += fl[_route(tree, data, iv, cs, half)]
        mean_patch /= len(model.trees)
        _scatter_patches(acc, cnt, np.ascontiguousarray(cs),
                         mean_patch.reshape((len(cs),) + model.patch_shape),
                         np.asarray(half, dtype=np.int64))
    out = np.zeros(dims, dtype=np.float32)
    np.divide(acc, cnt, out=acc, where=cnt > 0)
    # restrict support to the ROI proper
    sl = tuple(slice(int(lo[k]), int(hi[k])) for k in range(3))
    out[sl] = np.clip(acc[sl], 0.0, 1.0).astype(np.float32)
    return Volume3(data=out, spacing=v.spacing, origin=v.origin)
