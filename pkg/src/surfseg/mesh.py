"""Triangle meshes: mean shape, VOI-box fitting, k-means vertex parcellation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    pass


@dataclass
class VOIBox:
    lo: np.ndarray
    hi: np.ndarray
    object_id: int = 0

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if not np.all(self.hi > self.lo):
            raise MeshError("VOI box max must exceed min componentwise")

    def padded(self, frac: float) -> "VOIBox":
        c = (self.lo + self.hi) / 2
        half = (self.hi - self.lo) / 2 * (1 + frac)
        return VOIBox(c - half, c + half, self.object_id)

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(pts)
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)


@dataclass
class TriangleMesh:
    vertices: np.ndarray                  # (n, 3) world mm
    faces: np.ndarray                     # (m, 3) int
    clusters: np.ndarray | None = None    # (n,) int cluster ids
    _normals: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise MeshError("face index out of range")

    @property
    def normals(self) -> np.ndarray:
        if self._normals is None:
            self._normals = vertex_normals(self.vertices, self.faces)
        return self._normals

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def face_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def edges(self) -> np.ndarray:
        """Unique undirected vertex-index pairs (e, 2), sorted."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals, unit length."""
    v = vertices[faces]
    fn = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])  # 2*area weighted
    n = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(n, faces[:, k], fn)
    norms = np.linalg.norm(n, axis=1)
    norms[norms == 0] = 1.0
    return n / norms[:, None]


def icosphere(subdivisions: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere (vertices, faces); deterministic vertex ordering."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    verts = list(map(tuple, verts))
    faces = list(map(tuple, faces))
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                p = np.array(verts[a]) + np.array(verts[b])
                p /= np.linalg.norm(p)
                midpoint[key] = len(verts)
                verts.append(tuple(p))
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)


def mean_shape(meshes: list[TriangleMesh]) -> TriangleMesh:
    """Vertex-wise arithmetic mean of correspondent meshes."""
    if not meshes:
        raise MeshError("need at least one mesh")
    first = meshes[0]
    for m in meshes[1:]:
        if m.vertices.shape != first.vertices.shape or not np.array_equal(m.faces, first.faces):
            raise MeshError("meshes must share vertex count and face topology")
    mean = np.mean([m.vertices for m in meshes], axis=0)
    return TriangleMesh(vertices=mean, faces=first.faces.copy())


def laplacian_smooth(mesh: TriangleMesh, iterations: int = 3,
                     lam: float = 0.5) -> TriangleMesh:
    """Uniform-weight Laplacian smoothing: v += lam * (mean(neighbors) - v)."""
    if not 0.0 < lam <= 1.0:
        raise MeshError("smoothing weight must be in (0, 1]")
    e = mesh.edges()
    n = len(mesh.vertices)
    deg = np.zeros(n)
    np.add.at(deg, e[:, 0], 1.0)
    np.add.at(deg, e[:, 1], 1.0)
    if np.any(deg == 0):
        raise MeshError("mesh has isolated vertices")
    verts = mesh.vertices.copy()
    for _ in range(iterations):
        acc = np.zeros_like(verts)
        np.add.at(acc, e[:, 0], verts[e[:, 1]])
        np.add.at(acc, e[:, 1], verts[e[:, 0]])
        verts += lam * (acc / deg[:, None] - verts)
    return TriangleMesh(vertices=verts, faces=mesh.faces.copy(),
                        clusters=None if mesh.clusters is None
                        else mesh.clusters.copy())


def fit_to_voi(s0: TriangleMesh, voi: VOIBox) -> TriangleMesh:
    """Axis-aligned anisotropic scale + translation of s0's bbox onto voi."""
    lo, hi = s0.bbox()
    extent = hi - lo
    if np.any(extent <= 0):
        raise MeshError("degenerate source bounding box")
    scale = (voi.hi - voi.lo) / extent
    verts = (s0.vertices - lo) * scale + voi.lo
    return TriangleMesh(vertices=verts, faces=s0.faces.copy(), clusters=None if s0.clusters is None else s0.clusters.copy())


def kmeans_parcellate(mesh: TriangleMesh, k: int, seed: int = 0) -> TriangleMesh:
    """Lloyd's k-means on vertex coordinates; deterministic given seed.

    k-means++ init, iteration cap 100, tol 1e-6 mm. Empty clusters are
    re-seeded to the farthest point from its center.
    """
    pts = mesh.vertices
    n = len(pts)
    if k > n:
        raise MeshError(f"k={k} exceeds vertex count {n}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(pts, k, rng)
    prev_obj = np.inf
    reseeded = False
    for _ in range(100):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        obj = d2[np.arange(n), assign].sum()
        if not reseeded:
            assert obj <= prev_obj + 1e-9, "k-means objective increased"
        reseeded = False
        for c in range(k):
            sel = assign == c
            if sel.any():
                centers[c] = pts[sel].mean(axis=0)
            else:
                far = d2.min(axis=1).argmax()
                centers[c] = pts[far]
                assign[far] = c
                reseeded = True
        if prev_obj - obj < 1e-6:
            prev_obj = obj
            break
        prev_obj = obj
    # final assignment with empty-cluster repair
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    for c in range(k):
        if not (assign == c).any():
            far = d2.min(axis=1).argmax()
            assign[far] = c
    return TriangleMesh(vertices=mesh.vertices.copy(), faces=mesh.faces.copy(),
                        clusters=assign.astype(np.int64))


def _kmeanspp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(pts)
    centers = np.empty((k, 3))
    centers[0] = pts[rng.integers(n)]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c:] = pts[rng.integers(n, size=k - c)]
            break
        probs = d2 / total
        centers[c] = pts[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))
    return centers


def write_obj(mesh: TriangleMesh, path: str) -> None:
    """ASCII OBJ (v/f) plus ``<path>.clusters`` sidecar when cluster ids exist."""
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in mesh.faces:
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")
    if mesh.clusters is not None:
        with open(path + ".clusters", "w") as f:
            for c in mesh.clusters:
                f.write(f"{int(c)}\n")


def read_obj(path: str) -> TriangleMesh:
    verts, faces = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    clusters = None
    import os
    if os.path.exists(path + ".clusters"):
        with open(path + ".clusters") as f:
            clusters = np.array([int(line) for line in f if line.strip()], dtype=np.int64)
    return TriangleMesh(vertices=np.array(verts), faces=np.array(faces, dtype=np.int64),
                        clusters=clusters)
