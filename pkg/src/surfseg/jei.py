"""Interactive surface editing: nudge contours, node lookup, cost rewriting.

A nudge is a short contour drawn near the correct boundary on one slice. Its
samples are matched to graph columns through a k-d tree over node positions;
on every intersected column the cost profile is replaced by a 0/1 valley
centered on the intersecting node, and the flow network is re-solved warm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .graph import ColumnGraph
from .maxflow import QUANT_SCALE, FlowState, SurfaceSolution

AXES = {"x": 0, "y": 1, "z": 2}

DEFAULT_N_NEAREST = 4
DEFAULT_GATING_RADIUS_MM = 3.0


class JEIError(Exception):
    pass


class NudgeMissError(JEIError):
    """No graph column close enough to any nudge sample; nothing edited."""


@dataclass
class NudgeContour:
    """An ordered run of approximately-correct boundary points on one slice."""

    object_id: int
    surface_id: int
    axis: str                 # "x" | "y" | "z"
    slice_index: int
    points: np.ndarray        # (K, 3) world mm, all on the slice plane

    def __post_init__(self):
        if self.axis not in AXES:
            raise JEIError(f"unknown slice axis {self.axis!r}")
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.shape[0] < 1 or self.points.shape[1] != 3:
            raise JEIError("nudge needs at least one 3-d world point")

    def check_plane(self, offset: np.ndarray, spacing: np.ndarray) -> None:
        """Points must sit on the stated slice plane within half a voxel."""
        ax = AXES[self.axis]
        plane = offset[ax] + self.slice_index * spacing[ax]
        off = np.abs(self.points[:, ax] - plane)
        if np.any(off > 0.5 * spacing[ax] + 1e-9):
            raise JEIError(
                f"nudge points are {off.max():.3f} mm off the {self.axis}="
                f"{self.slice_index} plane (more than half a voxel)")


@dataclass
class EditRecord:
    """One applied nudge: enough to replay or revert it exactly."""

    seq: int
    edits: list               # [(surface, column, node, old_cost, new_cost)]
    objective_q: int


@dataclass
class NodeIndexKD:
    """Nearest-node lookup over every graph node, filterable by surface.

    One balanced median-split tree per surface (a surface only has nodes on
    its own object's columns); queries return (distance, column, node) and
    match a linear scan exactly.
    """

    graph: ColumnGraph
    _trees: list = field(default_factory=list)
    _cols: list = field(default_factory=list)   # per surface: global column ids

    def __post_init__(self):
        g = self.graph
        if g.n_columns == 0:
            raise JEIError("empty graph")
        size = g.column_size
        for obj, _surf in g.surfaces:
            cols = g.columns_of_object(obj)
            pts = g.nodes[cols].reshape(-1, 3)         # (len(cols)*size, 3)
            self._trees.append(cKDTree(pts, balanced_tree=True))
            self._cols.append(cols)
        self._n_per_surface = [len(c) * size for c in self._cols]

    @property
    def n_nodes(self) -> int:
        return int(sum(self._n_per_surface))

    def query(self, point, n: int, surface: int) -> list[tuple[float, int, int]]:
        """n nearest nodes of one surface: [(dist_mm, column, node)], sorted."""
        size = self.graph.column_size
        n = min(n, self._n_per_surface[surface])
        d, idx = self._trees[surface].query(np.asarray(point, float), k=n)
        d, idx = np.atleast_1d(d), np.atleast_1d(idx)
        cols = self._cols[surface]
        return [(float(d[m]), int(cols[idx[m] // size]), int(idx[m] % size))
                for m in range(n)]


def build_kd(g: ColumnGraph) -> NodeIndexKD:
    return NodeIndexKD(graph=g)


def densify(points: np.ndarray, spacing: float) -> np.ndarray:
    """Resample a polyline at ~spacing intervals (keeps original vertices)."""
    points = np.atleast_2d(points)
    if len(points) == 1:
        return points.copy()
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        seg = np.linalg.norm(b - a)
        n = max(int(np.ceil(seg / spacing)), 1)
        for t in range(1, n + 1):
            out.append(a + (b - a) * (t / n))
    return np.asarray(out)


def apply_nudge(fs: FlowState, g: ColumnGraph, kd: NodeIndexKD,
                nudge: NudgeContour, n_nearest: int = DEFAULT_N_NEAREST,
                delta: int = 2, seq: int = 0,
                gating_radius_mm: float = DEFAULT_GATING_RADIUS_MM,
                ) -> tuple[SurfaceSolution, EditRecord]:
    """Rewrite costs on the columns a nudge contour intersects and re-solve.

    On each intersected column i with intersecting node n(i), the new cost of
    node j is 0 if |j - n(i)| < delta (node-index distance) else 1. Only
    the target surface is touched.
    """
    try:
        s = g.surface_index(nudge.object_id, nudge.surface_id)
    except ValueError:
        raise JEIError(
            f"unknown target surface ({nudge.object_id}, {nudge.surface_id})")
    samples = densify(nudge.points, g.params.node_spacing)
    best: dict[int, tuple[float, int]] = {}   # column -> (dist, node)
    for p in samples:
        for dist, col, j in kd.query(p, n_nearest, s):
            if dist > gating_radius_mm:
                continue
            if col not in best or dist < best[col][0]:
                best[col] = (dist, j)
    if not best:
        raise NudgeMissError(
            f"no column within {gating_radius_mm} mm of any nudge sample")

    size = g.column_size
    edits = []
    for col in sorted(best):
        n_i = best[col][1]
        for j in range(size):
            old = fs.cost_q[s, col, j] / QUANT_SCALE
            new = 0.0 if abs(j - n_i) < delta else 1.0
            if new != old:
                edits.append((s, col, j, old, new))
    fs.update_costs((s, c, j, new) for s, c, j, _old, new in edits)
    sol = fs.resolve()
    return sol, EditRecord(seq=seq, edits=edits, objective_q=sol.objective_q)


def undo(fs: FlowState, history: list[EditRecord]) -> SurfaceSolution:
    """Revert the most recent edit record; objective is restored exactly."""
    if not history:
        raise JEIError("nothing to undo")
    rec = history.pop()
    fs.update_costs((s, c, j, old) for s, c, j, old, _new in rec.edits)
    return fs.resolve()
