"""Per-node feature extraction along graph columns.

28 scalar feature volumes are computed once (Gaussian derivatives in mm
units, Hessian eigenvalues, Laplacians, one Gabor response, local intensity
moments, Haar differences) and sampled trilinearly at every column node; two
more features are directional gradients computed along the column itself.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..graph import ColumnGraph
from ..volume import Volume3, trilinear_sample

HESSIAN_SIGMAS_MM = (0.5, 1.0, 2.0)
GRADIENT_SIGMAS_MM = (0.36, 0.7, 1.4)
SMOOTH_SIGMA_MM = 0.7
LAPLACIAN_SIGMAS_MM = (0.36, 0.7)
GABOR_FREQ_PER_MM = 0.5
GABOR_SIGMA_MM = 1.0
MOMENT_EXTENT_MM = 2.0
HAAR_EXTENT_MM = 1.5

FEATURE_NAMES = tuple(
    [f"hessian_eig{k}_s{s}" for s in HESSIAN_SIGMAS_MM for k in (1, 2, 3)]
    + [f"grad_intensity_s{s}" for s in GRADIENT_SIGMAS_MM]
    + [f"grad_naf_s{s}" for s in GRADIENT_SIGMAS_MM]
    + ["intensity", "intensity_smoothed", "naf"]
    + [f"laplacian_s{s}" for s in LAPLACIAN_SIGMAS_MM]
    + ["gabor_even_x"]
    + ["local_mean", "local_variance", "local_skewness", "local_kurtosis"]
    + ["haar_x", "haar_y", "haar_diag_xy"]
    + ["column_gradient_naf", "column_gradient_intensity"])
N_FEATURES = len(FEATURE_NAMES)   # 30


def _sigma_vox(v: Volume3, sigma_mm: float) -> np.ndarray:
    return sigma_mm / np.asarray(v.spacing, dtype=np.float64)


def _derivative(data, v, sigma_mm, order):
    """Gaussian-smoothed central-difference derivative, in per-mm units.

    scipy's sampled derivative-of-Gaussian kernels leave a truncation
    residual (a constant volume gets a nonzero 2nd derivative); smoothing
    then differencing annihilates constants exactly and is 2nd-order exact.
    """
    out = ndimage.gaussian_filter(data, _sigma_vox(v, sigma_mm),
                                  mode="nearest")
    for ax, o in enumerate(order):
        for _ in range(o):
            out = np.gradient(out, v.spacing[ax], axis=ax)
    return out


def _hessian_eigenvalues(data, v, sigma_mm):
    h = np.empty((3, 3) + data.shape)
    for a in range(3):
        for b in range(a, 3):
            order = [0, 0, 0]
            order[a] += 1
            order[b] += 1
            h[a, b] = h[b, a] = _derivative(data, v, sigma_mm, order)
    h = np.moveaxis(h, (0, 1), (-2, -1))
    eig = np.linalg.eigvalsh(h)          # ascending
    return eig[..., ::-1]                # descending: (nx,ny,nz,3)


def _gradient_magnitude(data, v, sigma_mm):
    g2 = np.zeros_like(data, dtype=np.float64)
    for ax in range(3):
        order = [0, 0, 0]
        order[ax] = 1
        g2 += _derivative(data, v, sigma_mm, order) ** 2
    return np.sqrt(g2)


def _laplacian(data, v, sigma_mm):
    out = np.zeros_like(data, dtype=np.float64)
    for ax in range(3):
        order = [0, 0, 0]
        order[ax] = 2
        out += _derivative(data, v, sigma_mm, order)
    return out


def _gabor_even_x(data, v):
    """Even (cosine) Gabor along x with an isotropic Gaussian envelope."""
    sx = GABOR_SIGMA_MM / v.spacing[0]
    half = max(int(np.ceil(4 * sx)), 1)
    x = np.arange(-half, half + 1) * v.spacing[0]
    kern = np.exp(-0.5 * (x / GABOR_SIGMA_MM) ** 2) * np.cos(
        2 * np.pi * GABOR_FREQ_PER_MM * x)
    kern /= np.abs(kern).sum()
    out = ndimage.convolve1d(data, kern, axis=0, mode="nearest")
    for ax in (1, 2):
        out = ndimage.gaussian_filter1d(out, GABOR_SIGMA_MM / v.spacing[ax],
                                        axis=ax, mode="nearest")
    return out


def _local_moments(data, v):
    """Mean, variance, skewness, excess kurtosis over a 2 mm box.

    Skewness and kurtosis are defined as 0 where the variance vanishes.
    """
    size = np.maximum(np.round(MOMENT_EXTENT_MM / v.spacing).astype(int), 1)
    size = tuple(int(s) | 1 for s in size)   # odd
    m1 = ndimage.uniform_filter(data, size, mode="nearest")
    m2 = ndimage.uniform_filter(data ** 2, size, mode="nearest")
    m3 = ndimage.uniform_filter(data ** 3, size, mode="nearest")
    m4 = ndimage.uniform_filter(data ** 4, size, mode="nearest")
    var = np.maximum(m2 - m1 ** 2, 0.0)
    c3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    c4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
    eps = 1e-12 * max(float(np.abs(data).max()), 1.0) ** 2
    ok = var > eps
    skew = np.zeros_like(var)
    kurt = np.zeros_like(var)
    skew[ok] = c3[ok] / var[ok] ** 1.5
    kurt[ok] = c4[ok] / var[ok] ** 2 - 3.0
    return m1, var, skew, kurt


def _haar(data, v, direction):
    """Difference of two 1.5 mm box means straddling the point.

    direction: unit voxel-step pattern 'x', 'y' or 'diag' (the xy diagonal).
    """
    size = np.maximum(np.round(HAAR_EXTENT_MM / v.spacing).astype(int), 1)
    box = ndimage.uniform_filter(data, tuple(int(s) | 1 for s in size),
                                 mode="nearest")
    half = np.maximum((HAAR_EXTENT_MM / 2) / v.spacing, 1.0)
    sx, sy = int(round(half[0])), int(round(half[1]))
    shift = {"x": (sx, 0, 0), "y": (0, sy, 0), "diag": (sx, sy, 0)}[direction]
    pad = [(s, s) for s in shift]
    padded = np.pad(box, pad, mode="edge")
    ix, iy, iz = shift
    nx, ny, nz = data.shape
    plus = padded[2 * ix: 2 * ix + nx, 2 * iy: 2 * iy + ny, 2 * iz: 2 * iz + nz]
    minus = padded[0:nx, 0:ny, 0:nz]
    return plus - minus


def feature_volumes(v: Volume3, nafmap: Volume3) -> list[np.ndarray]:
    """The 28 volume-domain feature images, in FEATURE_NAMES order."""
    if nafmap.data.shape != v.data.shape:
        raise ValueError("NAF map must be congruent with the intensity volume")
    data = v.data.astype(np.float64)
    naf = nafmap.data.astype(np.float64)
    vols: list[np.ndarray] = []
    for s in HESSIAN_SIGMAS_MM:
        eig = _hessian_eigenvalues(data, v, s)
        vols.extend(np.ascontiguousarray(eig[..., k]) for k in range(3))
    for s in GRADIENT_SIGMAS_MM:
        vols.append(_gradient_magnitude(data, v, s))
    for s in GRADIENT_SIGMAS_MM:
        vols.append(_gradient_magnitude(naf, v, s))
    vols.append(data)
    vols.append(ndimage.gaussian_filter(data, _sigma_vox(v, SMOOTH_SIGMA_MM),
                                        mode="nearest"))
    vols.append(naf)
    for s in LAPLACIAN_SIGMAS_MM:
        vols.append(_laplacian(data, v, s))
    vols.append(_gabor_even_x(data, v))
    vols.extend(_local_moments(data, v))
    for d in ("x", "y", "diag"):
        vols.append(_haar(data, v, d))
    return vols


def extract_features(v: Volume3, nafmap: Volume3, g: ColumnGraph) -> np.ndarray:
    """Per-node features: (n_columns, column_size, 30), finite."""
    vols = feature_volumes(v, nafmap)
    C, size, _ = g.nodes.shape
    pts = g.nodes.reshape(-1, 3)
    out = np.empty((C, size, N_FEATURES))
    for k, fv in enumerate(vols):
        vol = Volume3(data=fv, spacing=v.spacing, origin=v.origin)
        out[:, :, k] = trilinear_sample(vol, pts).reshape(C, size)
    # directional gradients along the column (per-mm central differences)
    naf_on = trilinear_sample(Volume3(data=nafmap.data.astype(np.float64),
                                      spacing=v.spacing, origin=v.origin),
                              pts).reshape(C, size)
    int_on = out[:, :, FEATURE_NAMES.index("intensity")]
    out[:, :, 28] = np.gradient(naf_on, g.params.node_spacing, axis=1)
    out[:, :, 29] = np.gradient(int_on, g.params.node_spacing, axis=1)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite feature value")
    return out
