"""Volume-of-interest detection: 3D Haar features + discrete AdaBoost.

Windows on a coarse grid are classified with box-sum features from an
integral volume; the VOI is the bounding box of positive windows, padded 5%.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import TriangleMesh, VOIBox
from ..volume import Volume3

N_HAAR_TYPES = 9
HAAR_SCALES = (1.0, 0.5)
DEFAULT_ROUNDS = 50
DEFAULT_WINDOW_MM = 14.0
VOI_PAD_FRACTION = 0.05


class VOIError(Exception):
    pass


def truth_voi(mesh: TriangleMesh, pad: float = VOI_PAD_FRACTION) -> VOIBox:
    """Detection bypass: the truth mesh's bounding box, padded."""
    lo, hi = mesh.bbox()
    return VOIBox(lo, hi).padded(pad)


def integral_volume(data: np.ndarray) -> np.ndarray:
    s = np.zeros(tuple(n + 1 for n in data.shape))
    s[1:, 1:, 1:] = data.astype(np.float64).cumsum(0).cumsum(1).cumsum(2)
    return s


def box_sum(iv: np.ndarray, lo, hi) -> np.ndarray:
    """Sum of data over [lo, hi) voxel boxes; lo/hi broadcast as (n, 3)."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    x0, y0, z0 = lo[:, 0], lo[:, 1], lo[:, 2]
    x1, y1, z1 = hi[:, 0], hi[:, 1], hi[:, 2]
    return (iv[x1, y1, z1] - iv[x0, y1, z1] - iv[x1, y0, z1] - iv[x1, y1, z0]
            + iv[x0, y0, z1] + iv[x0, y1, z0] + iv[x1, y0, z0]
            - iv[x0, y0, z0])


def _haar_responses(iv, lo, hi):
    """The 9 Haar-like responses for voxel boxes [lo, hi): (n, 9).

    Types: whole-box mean; 2-box contrasts along x/y/z; 4-box checkerboards
    in xy/yz/xz; 3-box center-surround along x; 3D center-surround.
    """
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    n = len(lo)
    mid = (lo + hi) // 2
    vol = np.maximum((hi - lo).prod(axis=1), 1)
    out = np.empty((n, N_HAAR_TYPES))
    total = box_sum(iv, lo, hi)
    out[:, 0] = total / vol
    for ax in range(3):          # types 1-3: half vs half along an axis
        hi_a = hi.copy(); hi_a[:, ax] = mid[:, ax]
        lo_b = lo.copy(); lo_b[:, ax] = mid[:, ax]
        out[:, 1 + ax] = (box_sum(iv, lo, hi_a) - box_sum(iv, lo_b, hi)) / vol
    planes = ((0, 1), (1, 2), (0, 2))
    for k, (a, b) in enumerate(planes):   # types 4-6: checkerboards
        acc = np.zeros(n)
        for sa in (0, 1):
            for sb in (0, 1):
                l2 = lo.copy(); h2 = hi.copy()
                (l2 if sa else h2)[:, a] = mid[:, a]
                (l2 if sb else h2)[:, b] = mid[:, b]
                sign = 1 if sa == sb else -1
                acc += sign * box_sum(iv, l2, h2)
        out[:, 4 + k] = acc / vol
    # type 7: center third vs surround along x
    third = np.maximum((hi[:, 0] - lo[:, 0]) // 3, 1)
    lc = lo.copy(); hc = hi.copy()
    lc[:, 0] = lo[:, 0] + third
    hc[:, 0] = np.maximum(hi[:, 0] - third, lc[:, 0] + 1)
    center = box_sum(iv, lc, hc)
    out[:, 7] = (2 * center - total) / vol
    # type 8: 3D center-surround (inner half-box vs the rest)
    q = np.maximum((hi - lo) // 4, 1)
    li = lo + q
    hi_i = np.maximum(hi - q, li + 1)
    inner = box_sum(iv, li, hi_i)
    out[:, 8] = (2 * inner - total) / vol
    return out


def window_features(iv, lo, hi) -> np.ndarray:
    """Haar responses at each configured scale: (n, 9 * n_scales)."""
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    feats = []
    center = (lo + hi) // 2
    for s in HAAR_SCALES:
        half = np.maximum(((hi - lo) * s / 2).astype(int), 1)
        feats.append(_haar_responses(iv, np.maximum(center - half, 0),
                                     np.maximum(center + half, 1)))
    return np.concatenate(feats, axis=1)


@dataclass
class AdaBoostModel:
    """Discrete AdaBoost over decision stumps."""

    feature: np.ndarray       # (T,) int
    threshold: np.ndarray     # (T,)
    polarity: np.ndarray      # (T,) ±1: predict + when polarity*(x-θ) > 0
    alpha: np.ndarray         # (T,)
    window_mm: float = DEFAULT_WINDOW_MM

    def decision(self, X: np.ndarray) -> np.ndarray:
        votes = np.sign(self.polarity[None, :]
                        * (X[:, self.feature] - self.threshold[None, :]))
        votes[votes == 0] = 1
        return votes @ self.alpha


def _best_stump(X, y, w):
    """Exhaustive weighted-error stump search; deterministic tie-break."""
    n, d = X.shape
    best = (1e18, 0, 0.0, 1)
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys, ws = X[order, f], y[order], w[order]
        # error of threshold below all samples, polarity +1: predict all +
        err_plus = np.cumsum(ws * (ys == 1))         # + samples left of θ
        err_minus = np.cumsum(ws * (ys == -1))
        total_minus = err_minus[-1]
        # θ between xs[i] and xs[i+1]: polarity +1 misclassifies +s at ≤ i
        # and -s above i
        e_p = err_plus + (total_minus - err_minus)
        e_m = 1.0 - e_p
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            theta = 0.5 * (xs[i] + xs[i + 1])
            if e_p[i] < best[0]:
                best = (e_p[i], f, theta, 1)
            if e_m[i] < best[0]:
                best = (e_m[i], f, theta, -1)
    return best


def train_voi(examples: list[tuple[np.ndarray, np.ndarray]],
              rounds: int = DEFAULT_ROUNDS) -> AdaBoostModel:
    """Fit discrete AdaBoost to (features, ±1 label) window examples.

    ``examples``: list of (X, y) per training volume, concatenated here.
    """
    X = np.concatenate([x for x, _ in examples])
    y = np.concatenate([l for _, l in examples]).astype(np.int8)
    if len(examples) < 2:
        raise VOIError("need at least 2 training examples")
    if np.all(y == y[0]):
        raise VOIError("degenerate training labels (single class)")
    n = len(y)
    w = np.full(n, 1.0 / n)
    fs, ths, pols, alphas = [], [], [], []
    for _ in range(rounds):
        err, f, theta, pol = _best_stump(X, y, w)
        err = min(max(err, 1e-12), 1 - 1e-12)
        if err >= 0.5:
            break
        alpha = 0.5 * np.log((1 - err) / err)
        pred = np.sign(pol * (X[:, f] - theta))
        pred[pred == 0] = 1
        w = w * np.exp(-alpha * y * pred)
        w /= w.sum()
        fs.append(f); ths.append(theta); pols.append(pol); alphas.append(alpha)
        if err < 1e-9:
            break
    return AdaBoostModel(feature=np.array(fs, dtype=np.int64),
                         threshold=np.array(ths), polarity=np.array(pols),
                         alpha=np.array(alphas))


def _window_grid(v: Volume3, window_mm: float):
    """Sliding windows on a half-window-stride coarse grid: (lo, hi) voxels."""
    win = np.maximum(np.round(window_mm / v.spacing).astype(int), 2)
    win = np.minimum(win, np.array(v.dims) - 1)
    stride = np.maximum(win // 2, 1)
    los = []
    for x in range(0, v.dims[0] - win[0] + 1, stride[0]):
        for yy in range(0, v.dims[1] - win[1] + 1, stride[1]):
            for z in range(0, v.dims[2] - win[2] + 1, stride[2]):
                los.append((x, yy, z))
    lo = np.array(los, dtype=np.int64)
    return lo, lo + win


def training_windows(v: Volume3, voi: VOIBox, window_mm: float = DEFAULT_WINDOW_MM):
    """Label grid windows by center containment in the truth VOI."""
    lo, hi = _window_grid(v, window_mm)
    iv = integral_volume(v.data)
    X = window_features(iv, lo, hi)
    centers_mm = v.origin + (lo + hi) / 2.0 * v.spacing
    y = np.where(np.all((centers_mm >= voi.lo) & (centers_mm <= voi.hi), axis=1),
                 1, -1)
    return X, y


def detect_voi(v: Volume3, model: AdaBoostModel,
               window_mm: float | None = None) -> VOIBox:
    """Classify grid windows; VOI = padded bbox of positive windows."""
    wmm = window_mm if window_mm is not None else model.window_mm
    lo, hi = _window_grid(v, wmm)
    iv = integral_volume(v.data)
    score = model.decision(window_features(iv, lo, hi))
    pos = score > 0
    if not np.any(pos):
        raise VOIError("no window classified positive; VOI detection failed")
    lo_mm = v.origin + lo[pos].min(axis=0) * v.spacing
    hi_mm = v.origin + hi[pos].max(axis=0) * v.spacing
    return VOIBox(lo_mm, hi_mm).padded(VOI_PAD_FRACTION)
