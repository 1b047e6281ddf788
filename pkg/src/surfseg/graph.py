"""Column graph construction: field-line column tracing and multi-object
multi-surface constraint topology."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from . import container
from .mesh import TriangleMesh

BONE = 0
CARTILAGE = 1


class GraphError(Exception):
    pass


@dataclass
class GraphParams:
    """Constraint and geometry parameters for graph construction.

    Minimum inter-surface and inter-object separations are fixed at zero.
    """

    smoothness: int = 2
    inter_surface_max: int = 20
    inter_object_max: int = 60
    column_size: int = 61
    node_spacing: float = 0.20

    def __post_init__(self):
        if min(self.smoothness, self.inter_surface_max, self.inter_object_max,
               self.column_size) < 0 or self.node_spacing <= 0:
            raise GraphError("graph parameters must be non-negative")
        if self.column_size < self.inter_surface_max:
            raise GraphError("column size must be >= inter-surface max")

    @property
    def anchor(self) -> int:
        """Node index of the anchoring mesh vertex (counted from the inside)."""
        return self.column_size // 3

    @classmethod
    def gradient_preset(cls) -> "GraphParams":
        return cls(smoothness=2, inter_surface_max=20, inter_object_max=60,
                   column_size=61, node_spacing=0.20)

    @classmethod
    def learned_preset(cls) -> "GraphParams":
        return cls(smoothness=4, inter_surface_max=40, inter_object_max=120,
                   column_size=121, node_spacing=0.15)


@dataclass
class Column:
    column_id: int
    object_id: int
    vertex_id: int
    nodes: np.ndarray      # (size, 3) world mm, inside -> outside
    node_spacing: float


@dataclass
class ColumnGraph:
    """Per-object non-crossing columns plus the constraint topology.

    Surfaces are (object id, surface index) with surface 0 = bone (inner)
    and 1 = cartilage (outer); both surfaces of an object share its columns.
    """

    nodes: np.ndarray                 # (C, size, 3)
    column_object: np.ndarray         # (C,)
    column_vertex: np.ndarray         # (C,) anchor vertex id within its object's mesh
    adjacency: np.ndarray             # (E, 2) global column ids, each pair once
    surfaces: list                    # [(object_id, surface_index), ...] sorted
    params: GraphParams
    object_meshes: list               # TriangleMesh per object (column anchors)
    inter_object_pairs: np.ndarray    # (P, 2) global column ids (one per object)
    inter_object_gap: np.ndarray      # (P,) int: x_a + x_b <= gap

    @property
    def n_columns(self) -> int:
        return len(self.column_object)

    @property
    def n_surfaces(self) -> int:
        return len(self.surfaces)

    @property
    def column_size(self) -> int:
        return self.nodes.shape[1]

    def surface_index(self, object_id: int, surf: int) -> int:
        return self.surfaces.index((object_id, surf))

    def columns_of_object(self, object_id: int) -> np.ndarray:
        return np.where(self.column_object == object_id)[0]

    def feasible(self, x: np.ndarray, eps: int = 0) -> bool:
        """Direct constraint check of a configuration x: (n_surfaces, C).

        Entries where the surface's object differs from the column's object
        are ignored (use -1 there by convention).
        """
        p = self.params
        size = self.column_size
        for s, (obj, _) in enumerate(self.surfaces):
            cols = self.columns_of_object(obj)
            xs = x[s, cols]
            if np.any((xs < 0) | (xs >= size)):
                return False
        for i, j in self.adjacency:
            oi = self.column_object[i]
            if oi != self.column_object[j]:
                continue
            for s, (obj, _) in enumerate(self.surfaces):
                if obj != oi:
                    continue
                if abs(int(x[s, i]) - int(x[s, j])) > p.smoothness:
                    return False
        for obj in np.unique(self.column_object):
            try:
                sb = self.surface_index(int(obj), BONE)
                sc = self.surface_index(int(obj), CARTILAGE)
            except ValueError:
                continue
            for i in self.columns_of_object(int(obj)):
                d = int(x[sc, i]) - int(x[sb, i])
                if d < 0 or d > p.inter_surface_max:
                    return False
        for (i, j), gap in zip(self.inter_object_pairs, self.inter_object_gap):
            si = self._outer_surface(self.column_object[i])
            sj = self._outer_surface(self.column_object[j])
            sep = int(gap) - int(x[si, i]) - int(x[sj, j])
            if sep < 0 or sep > p.inter_object_max:
                return False
        return True

    def _outer_surface(self, object_id: int) -> int:
        """Surface used for inter-object coupling: cartilage if present."""
        try:
            return self.surface_index(int(object_id), CARTILAGE)
        except ValueError:
            return self.surface_index(int(object_id), BONE)

    def save(self, path: str) -> None:
        meta = {
            "surfaces": [list(s) for s in self.surfaces],
            "params": {
                "smoothness": self.params.smoothness,
                "inter_surface_max": self.params.inter_surface_max,
                "inter_object_max": self.params.inter_object_max,
                "column_size": self.params.column_size,
                "node_spacing": self.params.node_spacing,
            },
            "n_objects": len(self.object_meshes),
        }
        arrays = {
            "nodes": self.nodes,
            "column_object": self.column_object,
            "column_vertex": self.column_vertex,
            "adjacency": self.adjacency,
            "inter_object_pairs": self.inter_object_pairs,
            "inter_object_gap": self.inter_object_gap,
        }
        for k, m in enumerate(self.object_meshes):
            arrays[f"mesh{k}_vertices"] = m.vertices
            arrays[f"mesh{k}_faces"] = m.faces
            if m.clusters is not None:
                arrays[f"mesh{k}_clusters"] = m.clusters
        container.save(path, arrays, meta)

    @classmethod
    def load(cls, path: str) -> "ColumnGraph":
        arrays, meta = container.load(path)
        params = GraphParams(**meta["params"])
        meshes = []
        for k in range(meta["n_objects"]):
            clusters = arrays.get(f"mesh{k}_clusters")
            meshes.append(TriangleMesh(vertices=arrays[f"mesh{k}_vertices"],
                                       faces=arrays[f"mesh{k}_faces"],
                                       clusters=clusters))
        return cls(
            nodes=arrays["nodes"],
            column_object=arrays["column_object"],
            column_vertex=arrays["column_vertex"],
            adjacency=arrays["adjacency"],
            surfaces=[tuple(s) for s in meta["surfaces"]],
            params=params,
            object_meshes=meshes,
            inter_object_pairs=arrays["inter_object_pairs"],
            inter_object_gap=arrays["inter_object_gap"],
        )


# ---------------------------------------------------------------------------
# Field-line column tracing

@njit(cache=True, fastmath=True)
def _field(x, charges, weights):
    ex = 0.0
    ey = 0.0
    ez = 0.0
    min_r2 = 1e30
    for k in range(charges.shape[0]):
        dx = x[0] - charges[k, 0]
        dy = x[1] - charges[k, 1]
        dz = x[2] - charges[k, 2]
        r2 = dx * dx + dy * dy + dz * dz
        if r2 < min_r2:
            min_r2 = r2
        inv = weights[k] / (r2 * np.sqrt(r2) + 1e-300)
        ex += dx * inv
        ey += dy * inv
        ez += dz * inv
    return ex, ey, ez, min_r2


@njit(cache=True, fastmath=True)
def _step_dir(x, d_prev, charges, weights, e_floor):
    """Field direction with forward continuity (sign follows d_prev).

    Below ``e_floor`` the field is discretization noise (interior of a
    closed charge shell); the trace continues straight there.
    """
    ex, ey, ez, min_r2 = _field(x, charges, weights)
    nrm = np.sqrt(ex * ex + ey * ey + ez * ez)
    if nrm < e_floor:
        return d_prev[0], d_prev[1], d_prev[2], min_r2
    ex /= nrm
    ey /= nrm
    ez /= nrm
    if ex * d_prev[0] + ey * d_prev[1] + ez * d_prev[2] < 0.0:
        ex, ey, ez = -ex, -ey, -ez
    return ex, ey, ez, min_r2


@njit(cache=True)
def _place_nodes(x, last, nx, ny, nz, spacing, placed, n_nodes, out):
    """Place nodes where the segment [x, (nx,ny,nz)] crosses distance
    ``spacing`` from the last placed node; advances ``x`` to each crossing.

    The crossing test is gated on the segment *end* being at least
    ``spacing`` from the last node and the root is clamped into [0, 1]:
    when the integrator step divides the spacing exactly, crossings land on
    t == 1 and bare root comparisons can round to a miss, after which the
    trace sits just outside the placement sphere and would never place
    again. No fastmath here: the gate must agree with the clamp.
    """
    while placed < n_nodes:
        ex_ = nx - last[0]
        ey_ = ny - last[1]
        ez_ = nz - last[2]
        if ex_ * ex_ + ey_ * ey_ + ez_ * ez_ < spacing * spacing:
            break
        ax = x[0] - last[0]
        ay = x[1] - last[1]
        az = x[2] - last[2]
        bx = nx - x[0]
        by = ny - x[1]
        bz = nz - x[2]
        cc = ax * ax + ay * ay + az * az - spacing * spacing
        bb2 = bx * bx + by * by + bz * bz
        if bb2 < 1e-30:
            break
        ab = ax * bx + ay * by + az * bz
        disc = ab * ab - bb2 * cc
        if disc < 0.0:
            t = 1.0
        else:
            t = (-ab + np.sqrt(disc)) / bb2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        px = x[0] + t * bx
        py = x[1] + t * by
        pz = x[2] + t * bz
        out[placed, 0] = px
        out[placed, 1] = py
        out[placed, 2] = pz
        last[0] = px
        last[1] = py
        last[2] = pz
        placed += 1
        # continue node search within the remainder of this segment
        x[0] = px
        x[1] = py
        x[2] = pz
    return placed


@njit(cache=True, fastmath=True)
def _trace_side(start, init_dir, n_nodes, spacing, charges, weights, lo, hi, e_floor, out):
    """Trace one side of a column, placing n_nodes nodes spacing apart.

    Returns 0 on success, 1 if the trace leaves the bounds, 2 if it is
    stuck near a charge.
    """
    x = start.copy()
    d = init_dir.copy()
    last = start.copy()
    placed = 0
    # The field evaluated on the charge shell itself is dominated by
    # quadrature noise, so take the first step straight along the seed
    # direction and only start following the field from the first node.
    if n_nodes > 0:
        for k in range(3):
            x[k] = start[k] + spacing * init_dir[k]
        if (x[0] < lo[0] or x[0] > hi[0] or x[1] < lo[1] or x[1] > hi[1]
                or x[2] < lo[2] or x[2] > hi[2]):
            return 1
        for k in range(3):
            out[0, k] = x[k]
            last[k] = x[k]
        placed = 1
    h0 = spacing / 4.0
    tmp = np.empty(3)
    guard = 0
    # Arc-length budget: a straight path needs 4 steps per node spacing;
    # allow 20x that for curvature. Field-following near the charge shell
    # can orbit chaotically without ever placing a node; once the budget is
    # spent, degrade to straight continuation rather than looping forever.
    budget = 80 * n_nodes + 400
    latched = False
    while placed < n_nodes:
        guard += 1
        if guard > budget and not latched:
            latched = True
            # A spent budget means the trace orbited; the current point may
            # sit outside the placement sphere of the last node, where the
            # crossing test can never fire again. Re-seed it here.
            last[0] = x[0]
            last[1] = x[1]
            last[2] = x[2]
        if latched:
            # Straight continuation is sticky: once the field has fallen to
            # quadrature noise, wobbling in and out of the noise floor can
            # trap the trace against the shell, so stay ballistic.
            nx = x[0] + h0 * d[0]
            ny = x[1] + h0 * d[1]
            nz = x[2] + h0 * d[2]
        else:
            ex, ey, ez, _ = _field(x, charges, weights)
            if np.sqrt(ex * ex + ey * ey + ez * ez) < e_floor:
                latched = True
                continue
            nx, ny, nz, ok = 0.0, 0.0, 0.0, False
        if latched:
            if (nx < lo[0] or nx > hi[0] or ny < lo[1] or ny > hi[1]
                    or nz < lo[2] or nz > hi[2]):
                return 1
            placed = _place_nodes(x, last, nx, ny, nz, spacing, placed,
                                  n_nodes, out)
            x[0] = nx
            x[1] = ny
            x[2] = nz
            continue
        h = h0
        ok = False
        for _ in range(40):
            d1x, d1y, d1z, r2a = _step_dir(x, d, charges, weights, e_floor)
            tmp[0] = x[0] + 0.5 * h * d1x
            tmp[1] = x[1] + 0.5 * h * d1y
            tmp[2] = x[2] + 0.5 * h * d1z
            d2x, d2y, d2z, r2b = _step_dir(tmp, d, charges, weights, e_floor)
            tmp[0] = x[0] + 0.5 * h * d2x
            tmp[1] = x[1] + 0.5 * h * d2y
            tmp[2] = x[2] + 0.5 * h * d2z
            d3x, d3y, d3z, r2c = _step_dir(tmp, d, charges, weights, e_floor)
            tmp[0] = x[0] + h * d3x
            tmp[1] = x[1] + h * d3y
            tmp[2] = x[2] + h * d3z
            d4x, d4y, d4z, r2d = _step_dir(tmp, d, charges, weights, e_floor)
            nx = x[0] + h / 6.0 * (d1x + 2 * d2x + 2 * d3x + d4x)
            ny = x[1] + h / 6.0 * (d1y + 2 * d2y + 2 * d3y + d4y)
            nz = x[2] + h / 6.0 * (d1z + 2 * d2z + 2 * d3z + d4z)
            min_r2 = min(min(r2a, r2b), min(r2c, r2d))
            if min_r2 < 1e-12:  # within 1e-6 mm of a charge: reject, halve
                h *= 0.5
                continue
            ok = True
            break
        if not ok:
            return 2
        if (nx < lo[0] or nx > hi[0] or ny < lo[1] or ny > hi[1]
                or nz < lo[2] or nz > hi[2]):
            return 1
        sx = nx - x[0]
        sy = ny - x[1]
        sz = nz - x[2]
        snrm = np.sqrt(sx * sx + sy * sy + sz * sz)
        if snrm > 1e-15:
            d[0] = sx / snrm
            d[1] = sy / snrm
            d[2] = sz / snrm
        placed = _place_nodes(x, last, nx, ny, nz, spacing, placed, n_nodes,
                              out)
        x[0] = nx
        x[1] = ny
        x[2] = nz
    return 0


@njit(parallel=True, cache=True, fastmath=True)
def _trace_all(verts, normals, charges, weights, size, anchor, spacing, lo, hi):
    n = verts.shape[0]
    nodes = np.empty((n, size, 3))
    status = np.zeros(n, dtype=np.int64)
    n_out = size - 1 - anchor
    n_in = anchor
    for i in prange(n):
        nodes[i, anchor, 0] = verts[i, 0]
        nodes[i, anchor, 1] = verts[i, 1]
        nodes[i, anchor, 2] = verts[i, 2]
        buf_out = np.empty((n_out, 3))
        ex, ey, ez, _ = _field(verts[i], charges, weights)
        e_ref = np.sqrt(ex * ex + ey * ey + ez * ez)
        st = _trace_side(verts[i].copy(), normals[i].copy(), n_out, spacing,
                         charges, weights, lo, hi, 0.1 * e_ref, buf_out)
        if st != 0:
            status[i] = st
            continue
        for j in range(n_out):
            nodes[i, anchor + 1 + j, 0] = buf_out[j, 0]
            nodes[i, anchor + 1 + j, 1] = buf_out[j, 1]
            nodes[i, anchor + 1 + j, 2] = buf_out[j, 2]
        if n_in > 0:
            buf_in = np.empty((n_in, 3))
            # Inside a closed charge shell the field decays to lattice noise
            # within roughly one edge length, and following that noise bends
            # the column; fall back to a straight continuation much sooner.
            st = _trace_side(verts[i].copy(), -normals[i].copy(), n_in, spacing,
                             charges, weights, lo, hi, 0.35 * e_ref, buf_in)
            if st != 0:
                status[i] = st
                continue
            for j in range(n_in):
                nodes[i, anchor - 1 - j, 0] = buf_in[j, 0]
                nodes[i, anchor - 1 - j, 1] = buf_in[j, 1]
                nodes[i, anchor - 1 - j, 2] = buf_in[j, 2]
    return nodes, status


def _charge_quadrature(mesh: TriangleMesh, levels: int = 1):
    """Charge positions/weights for the surface charge distribution.

    One charge per face centroid is too coarse: just inside the shell the
    residual lattice field can tilt several degrees off the surface normal.
    Splitting every face into 4**levels coplanar subtriangles (charge at each
    sub-centroid, weight = sub-area) is a finer quadrature of the same
    distribution and pushes that noise much closer to the surface.
    """
    v0 = mesh.vertices[mesh.faces[:, 0]]
    v1 = mesh.vertices[mesh.faces[:, 1]]
    v2 = mesh.vertices[mesh.faces[:, 2]]
    for _ in range(levels):
        m01, m12, m20 = (v0 + v1) / 2, (v1 + v2) / 2, (v2 + v0) / 2
        v0 = np.concatenate([v0, m01, m20, m01])
        v1 = np.concatenate([m01, v1, m12, m12])
        v2 = np.concatenate([m20, m12, v2, m20])
    charges = (v0 + v1 + v2) / 3.0
    weights = 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)
    return np.ascontiguousarray(charges), np.ascontiguousarray(weights)


def build_elf_columns(mesh: TriangleMesh, params: GraphParams,
                      bounds: tuple | None = None,
                      object_id: int = 0) -> list[Column]:
    """Trace one search column per mesh vertex along the field lines of unit
    charges placed at face centroids (area-weighted).

    Nodes run inside -> outside with the vertex at interior index
    ``params.anchor``; consecutive nodes are ``node_spacing`` apart.
    ``bounds`` is an optional (lo, hi) world-mm box the traces must stay in.
    """
    charges, weights = _charge_quadrature(mesh)
    if bounds is None:
        lo = mesh.vertices.min(axis=0) - 1e6
        hi = mesh.vertices.max(axis=0) + 1e6
    else:
        lo, hi = np.asarray(bounds[0], dtype=np.float64), np.asarray(bounds[1], dtype=np.float64)
    nodes, status = _trace_all(
        np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.normals),
        np.ascontiguousarray(charges), np.ascontiguousarray(weights),
        params.column_size, params.anchor, params.node_spacing,
        lo, hi)
    if np.any(status == 1):
        bad = int(np.where(status == 1)[0][0])
        raise GraphError(
            f"column trace for vertex {bad} left the volume bounds before "
            f"reaching {params.column_size} nodes; shrink column size or spacing")
    if np.any(status == 2):
        bad = int(np.where(status == 2)[0][0])
        raise GraphError(f"column trace for vertex {bad} stalled near a charge")
    return [Column(column_id=i, object_id=object_id, vertex_id=i,
                   nodes=nodes[i], node_spacing=params.node_spacing)
            for i in range(len(mesh.vertices))]


def assemble_graph(columns_per_object: list[list[Column]],
                   meshes: list[TriangleMesh],
                   params: GraphParams,
                   surfaces_per_object: int = 2) -> ColumnGraph:
    """Stack per-object columns and build adjacency plus coupling topology.

    Adjacency comes from mesh edges. Inter-object coupling pairs columns of
    different objects by mutual-nearest anchor distance within a
    2 * node-spacing gate.
    """
    all_nodes = []
    col_obj = []
    col_vert = []
    adjacency = []
    offset = 0
    offsets = []
    for obj, (cols, m) in enumerate(zip(columns_per_object, meshes)):
        if len(cols) != len(m.vertices):
            raise GraphError("column list incomplete for object %d" % obj)
        offsets.append(offset)
        for c in cols:
            all_nodes.append(c.nodes)
            col_obj.append(obj)
            col_vert.append(c.vertex_id)
        e = m.edges() + offset
        adjacency.append(e)
        offset += len(cols)
    nodes = np.stack(all_nodes)
    column_object = np.array(col_obj, dtype=np.int64)
    column_vertex = np.array(col_vert, dtype=np.int64)
    adjacency = np.concatenate(adjacency) if adjacency else np.empty((0, 2), np.int64)
    if adjacency.size and adjacency.max() >= len(column_object):
        raise GraphError("adjacency references unknown columns")

    surfaces = []
    for obj in range(len(meshes)):
        for s in range(surfaces_per_object):
            surfaces.append((obj, s))

    pairs, gaps = [], []
    if len(meshes) == 2:
        a = np.where(column_object == 0)[0]
        b = np.where(column_object == 1)[0]
        va = nodes[a, params.anchor, :]
        vb = nodes[b, params.anchor, :]
        # outward column direction at the anchor
        da = nodes[a, params.anchor + 1, :] - va
        db = nodes[b, params.anchor + 1, :] - vb
        da /= np.linalg.norm(da, axis=1, keepdims=True)
        db /= np.linalg.norm(db, axis=1, keepdims=True)
        # facing pairs: each anchor lies outward of the other and the
        # columns are roughly antiparallel
        sep = vb[None, :, :] - va[:, None, :]             # (A, B, 3)
        ax_a = np.einsum("abk,ak->ab", sep, da)           # along a, toward b
        ax_b = -np.einsum("abk,bk->ab", sep, db)
        facing = (ax_a > 0) & (ax_b > 0) & (np.einsum("ak,bk->ab", da, db) < 0)
        # transverse offset of b's anchor from a's column line
        trans = np.linalg.norm(sep - ax_a[..., None] * da[:, None, :], axis=2)
        gate = 2.0 * params.node_spacing
        d = np.where(facing & (trans <= gate), trans, np.inf)
        if np.isfinite(d).any():
            nearest_b = d.argmin(axis=1)
            nearest_a = d.argmin(axis=0)
            for ia in range(len(a)):
                ib = nearest_b[ia]
                if np.isfinite(d[ia, ib]) and nearest_a[ib] == ia:
                    axial = 0.5 * (ax_a[ia, ib] + ax_b[ia, ib])
                    pairs.append((a[ia], b[ib]))
                    gaps.append(int(axial / params.node_spacing)
                                + 2 * params.anchor)
    inter_object_pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    inter_object_gap = np.array(gaps, dtype=np.int64)

    return ColumnGraph(nodes=nodes, column_object=column_object,
                       column_vertex=column_vertex, adjacency=adjacency,
                       surfaces=surfaces, params=params, object_meshes=meshes,
                       inter_object_pairs=inter_object_pairs,
                       inter_object_gap=inter_object_gap)


def straight_column_graph(n_columns: int, params: GraphParams,
                          n_objects: int = 1, surfaces_per_object: int = 2,
                          origin=(0.0, 0.0, 0.0), grid_step: float = 1.0) -> ColumnGraph:
    """Synthetic graph with straight z-columns on an x-y grid.

    Used for solver benchmarks and constraint tests where traced geometry
    is irrelevant. Adjacency is the 4-neighbor grid per object.
    """
    side = int(np.ceil(np.sqrt(n_columns)))
    meshes = []
    columns = []
    for obj in range(n_objects):
        verts = []
        for i in range(n_columns):
            gx, gy = i % side, i // side
            verts.append([origin[0] + gx * grid_step,
                          origin[1] + gy * grid_step + obj * (side + 2) * grid_step,
                          origin[2]])
        verts = np.array(verts)
        faces = []
        for i in range(n_columns):
            gx, gy = i % side, i // side
            if gx + 1 < side and i + 1 < n_columns and gy * side + gx + 1 < n_columns:
                if (gy + 1) * side + gx + 1 < n_columns:
                    faces.append([i, i + 1, i + side + 1])
                if (gy + 1) * side + gx < n_columns:
                    faces.append([i, i + side + 1, i + side]
                                 if i + side + 1 < n_columns else [i, i + 1, i + side])
        if not faces:
            faces = [[0, 0, 0]]
        mesh = TriangleMesh(vertices=verts, faces=np.array(faces, dtype=np.int64))
        cols = []
        for i in range(n_columns):
            z = np.arange(params.column_size) - params.anchor
            nodes = np.tile(verts[i], (params.column_size, 1))
            nodes[:, 2] = verts[i][2] + z * params.node_spacing
            cols.append(Column(column_id=i, object_id=obj, vertex_id=i,
                               nodes=nodes, node_spacing=params.node_spacing))
        meshes.append(mesh)
        columns.append(cols)
    g = assemble_graph(columns, meshes, params, surfaces_per_object)
    # grid adjacency instead of the fake mesh edges
    adj = []
    for obj in range(n_objects):
        off = obj * n_columns
        for i in range(n_columns):
            gx, gy = i % side, i // side
            if gx + 1 < side and i + 1 < n_columns:
                adj.append([off + i, off + i + 1])
            if i + side < n_columns:
                adj.append([off + i, off + i + side])
    g.adjacency = np.array(adj, dtype=np.int64).reshape(-1, 2)
    return g
