"""Minimum closed set over a ColumnGraph via s-t max-flow.

Augmenting-path solver with growth/adoption search trees kept alive between
solves, so cost edits re-solve from the previous flow instead of from
scratch. Costs are quantized to integers (scale 1e4) so optimality
comparisons are exact.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .costs import CostField
from .graph import ColumnGraph

QUANT_SCALE = 10_000
INF_CAP = np.int64(1) << 60

TREE_FREE = 0
TREE_S = 1
TREE_T = 2
PARENT_NONE = -1
PARENT_TERMINAL = -2
PARENT_ORPHAN = -3


class FlowError(Exception):
    pass


@dataclass
class SolverStats:
    augmentations: int = 0
    orphans: int = 0
    wall_ms: float = 0.0


@dataclass
class SurfaceSolution:
    """Chosen node index per (surface, column); -1 where undefined."""

    x: np.ndarray             # (n_surfaces, C) int64
    objective_q: int          # quantized objective, exact
    objective: float

    def copy(self) -> "SurfaceSolution":
        return SurfaceSolution(self.x.copy(), self.objective_q, self.objective)


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _build_lists(n_nodes, tails, heads):
    m = 2 * len(tails)
    a_head = np.empty(m, dtype=np.int64)
    a_next = np.empty(m, dtype=np.int64)
    node_first = np.full(n_nodes, -1, dtype=np.int64)
    for k in range(len(tails)):
        t = tails[k]
        h = heads[k]
        e = 2 * k
        a_head[e] = h
        a_next[e] = node_first[t]
        node_first[t] = e
        e = 2 * k + 1
        a_head[e] = t
        a_next[e] = node_first[h]
        node_first[h] = e
    return a_head, a_next, node_first


@njit(cache=True, inline="always")
def _push_active(u, nxt_active, qstate, n_nodes):
    if nxt_active[u] != -1:
        return
    if qstate[1] == -1:
        qstate[0] = u
    else:
        nxt_active[qstate[1]] = u
    qstate[1] = u
    nxt_active[u] = n_nodes  # END sentinel


@njit(cache=True, inline="always")
def _pop_active(nxt_active, qstate, n_nodes):
    u = qstate[0]
    if u == -1:
        return -1
    nxt = nxt_active[u]
    if nxt == n_nodes:
        qstate[0] = -1
        qstate[1] = -1
    else:
        qstate[0] = nxt
    nxt_active[u] = -1
    return u


@njit(cache=True, inline="always")
def _push_orphan(u, orphan_buf, ostate):
    orphan_buf[ostate[1] % len(orphan_buf)] = u
    ostate[1] += 1


@njit(cache=True)
def _adopt(u, a_head, a_next, a_cap, node_first, tr_cap, tree, parent,
           ts_arr, dist, orphan_buf, ostate, nxt_active, qstate, n_nodes, now):
    """Try to find a new parent for orphan u; free it on failure."""
    in_s = tree[u] == TREE_S
    min_d = np.int64(1) << 62
    best = PARENT_NONE
    e = node_first[u]
    while e != -1:
        rcap = a_cap[e ^ 1] if in_s else a_cap[e]
        if rcap > 0:
            q = a_head[e]
            if tree[q] == tree[u]:
                # verify q's path reaches a terminal-rooted origin
                d = np.int64(0)
                v = q
                valid = True
                while True:
                    if ts_arr[v] == now:
                        d += dist[v]
                        break
                    pa = parent[v]
                    d += 1
                    if pa == PARENT_TERMINAL:
                        ts_arr[v] = now
                        dist[v] = 1
                        break
                    if pa == PARENT_ORPHAN or pa == PARENT_NONE:
                        valid = False
                        break
                    v = a_head[pa]
                if valid:
                    if d < min_d:
                        min_d = d
                        best = e
                    v = q
                    while ts_arr[v] != now:
                        ts_arr[v] = now
                        dist[v] = d
                        d -= 1
                        v = a_head[parent[v]]
        e = a_next[e]
    parent[u] = best
    if best != PARENT_NONE:
        ts_arr[u] = now
        dist[u] = min_d + 1
        return 0
    # no parent: u leaves the tree
    e = node_first[u]
    while e != -1:
        q = a_head[e]
        if tree[q] == tree[u]:
            pa = parent[q]
            rcap = a_cap[e ^ 1] if in_s else a_cap[e]
            if rcap > 0:
                _push_active(q, nxt_active, qstate, n_nodes)
            if pa >= 0 and a_head[pa] == u:
                parent[q] = PARENT_ORPHAN
                _push_orphan(q, orphan_buf, ostate)
        e = a_next[e]
    tree[u] = TREE_FREE
    parent[u] = PARENT_NONE
    return 1


@njit(cache=True)
def _augment(conn, a_head, a_cap, tr_cap, parent, orphan_buf, ostate):
    """Push flow along the path s -> ... -> tail(conn) -> head(conn) -> ... -> t."""
    a = a_head[conn ^ 1]
    b = a_head[conn]
    bottleneck = a_cap[conn]
    u = a
    while parent[u] != PARENT_TERMINAL:
        pa = parent[u]
        r = a_cap[pa ^ 1]
        if r < bottleneck:
            bottleneck = r
        u = a_head[pa]
    if tr_cap[u] < bottleneck:
        bottleneck = tr_cap[u]
    u = b
    while parent[u] != PARENT_TERMINAL:
        pa = parent[u]
        r = a_cap[pa]
        if r < bottleneck:
            bottleneck = r
        u = a_head[pa]
    if -tr_cap[u] < bottleneck:
        bottleneck = -tr_cap[u]

    a_cap[conn] -= bottleneck
    a_cap[conn ^ 1] += bottleneck
    u = a
    while parent[u] != PARENT_TERMINAL:
        pa = parent[u]
        a_cap[pa] += bottleneck
        a_cap[pa ^ 1] -= bottleneck
        if a_cap[pa ^ 1] == 0:
            parent[u] = PARENT_ORPHAN
            _push_orphan(u, orphan_buf, ostate)
        u = a_head[pa]
    tr_cap[u] -= bottleneck
    if tr_cap[u] == 0:
        parent[u] = PARENT_ORPHAN
        _push_orphan(u, orphan_buf, ostate)
    u = b
    while parent[u] != PARENT_TERMINAL:
        pa = parent[u]
        a_cap[pa] -= bottleneck
        a_cap[pa ^ 1] += bottleneck
        if a_cap[pa] == 0:
            parent[u] = PARENT_ORPHAN
            _push_orphan(u, orphan_buf, ostate)
        u = a_head[pa]
    tr_cap[u] += bottleneck
    if tr_cap[u] == 0:
        parent[u] = PARENT_ORPHAN
        _push_orphan(u, orphan_buf, ostate)
    return bottleneck


@njit(cache=True)
def _run(a_head, a_next, a_cap, node_first, tr_cap, tree, parent, ts_arr, dist,
         nxt_active, qstate, orphan_buf, ostate):
    """Main growth/augment/adopt loop; runs until no active nodes remain.

    qstate = [queue_first, queue_last, time]; ostate = [orphan_head, orphan_tail].
    Returns (flow_delta, augmentations, orphans_processed).
    """
    n_nodes = len(tree)
    flow = np.int64(0)
    augments = np.int64(0)
    orphans = np.int64(0)
    # settle any pending orphans first (warm restart)
    while ostate[0] < ostate[1]:
        u = orphan_buf[ostate[0] % len(orphan_buf)]
        ostate[0] += 1
        if parent[u] == PARENT_ORPHAN and tree[u] != TREE_FREE:
            orphans += _adopt(u, a_head, a_next, a_cap, node_first, tr_cap,
                              tree, parent, ts_arr, dist, orphan_buf, ostate,
                              nxt_active, qstate, n_nodes, qstate[2])
    while True:
        p = _pop_active(nxt_active, qstate, n_nodes)
        if p == -1:
            break
        if tree[p] == TREE_FREE:
            continue
        in_s = tree[p] == TREE_S
        conn = -1
        e = node_first[p]
        while e != -1:
            rcap = a_cap[e] if in_s else a_cap[e ^ 1]
            if rcap > 0:
                q = a_head[e]
                if tree[q] == TREE_FREE:
                    tree[q] = tree[p]
                    parent[q] = e ^ 1
                    ts_arr[q] = ts_arr[p]
                    dist[q] = dist[p] + 1
                    _push_active(q, nxt_active, qstate, n_nodes)
                elif tree[q] != tree[p]:
                    conn = e if in_s else e ^ 1
                    break
            e = a_next[e]
        if conn == -1:
            continue
        _push_active(p, nxt_active, qstate, n_nodes)
        qstate[2] += 1
        flow += _augment(conn, a_head, a_cap, tr_cap, parent, orphan_buf, ostate)
        augments += 1
        while ostate[0] < ostate[1]:
            u = orphan_buf[ostate[0] % len(orphan_buf)]
            ostate[0] += 1
            if parent[u] == PARENT_ORPHAN and tree[u] != TREE_FREE:
                orphans += _adopt(u, a_head, a_next, a_cap, node_first, tr_cap,
                                  tree, parent, ts_arr, dist, orphan_buf, ostate,
                                  nxt_active, qstate, n_nodes, qstate[2])
    return flow, augments, orphans


@njit(cache=True)
def _init_roots(tr_cap, tree, parent, dist, nxt_active, qstate):
    n_nodes = len(tree)
    for u in range(n_nodes):
        if tr_cap[u] > 0:
            tree[u] = TREE_S
            parent[u] = PARENT_TERMINAL
            dist[u] = 1
            _push_active(u, nxt_active, qstate, n_nodes)
        elif tr_cap[u] < 0:
            tree[u] = TREE_T
            parent[u] = PARENT_TERMINAL
            dist[u] = 1
            _push_active(u, nxt_active, qstate, n_nodes)
        else:
            tree[u] = TREE_FREE
            parent[u] = PARENT_NONE


@njit(cache=True)
def _warm_prep(dirty, a_head, a_next, node_first, tr_cap, tree, parent, dist,
               nxt_active, qstate, orphan_buf, ostate):
    """Re-root edited nodes to match their new terminal capacity sign and
    orphan their former children (adoption repairs the trees)."""
    n_nodes = len(tree)
    # Path-origin marks (ts_arr) from the previous run describe pre-edit
    # trees; trusting them lets adoption wire a parent cycle. Advance the
    # clock so they are all stale.
    qstate[2] += 1
    for k in range(len(dirty)):
        u = dirty[k]
        e = node_first[u]
        while e != -1:
            q = a_head[e]
            if tree[q] != TREE_FREE:
                pa = parent[q]
                if pa >= 0 and a_head[pa] == u:
                    parent[q] = PARENT_ORPHAN
                    _push_orphan(q, orphan_buf, ostate)
                _push_active(q, nxt_active, qstate, n_nodes)
            e = a_next[e]
        if tr_cap[u] > 0:
            tree[u] = TREE_S
            parent[u] = PARENT_TERMINAL
            dist[u] = 1
            _push_active(u, nxt_active, qstate, n_nodes)
        elif tr_cap[u] < 0:
            tree[u] = TREE_T
            parent[u] = PARENT_TERMINAL
            dist[u] = 1
            _push_active(u, nxt_active, qstate, n_nodes)
        else:
            tree[u] = TREE_FREE
            parent[u] = PARENT_NONE


# ---------------------------------------------------------------------------
# FlowState

class FlowState:
    """Persistent s-t flow network over a ColumnGraph's nodes.

    Node ids are dense: ((surface * C) + column) * size + internal_node.
    Surfaces of object 1 are stored with reversed node order internally so
    the inter-object coupling reduces to difference constraints; the flip
    is invisible through the public API.
    """

    def __init__(self, graph: ColumnGraph, costs: CostField):
        if costs.costs.shape != (graph.n_surfaces, graph.n_columns, graph.column_size):
            raise FlowError("cost field shape does not match graph")
        self.graph = graph
        self.size = graph.column_size
        self.n_surfaces = graph.n_surfaces
        self.n_cols = graph.n_columns
        self.n_nodes = self.n_surfaces * self.n_cols * self.size
        self.flip = np.array([obj == 1 for obj, _ in graph.surfaces])
        surf_obj = np.array([obj for obj, _ in graph.surfaces])
        self.valid = surf_obj[:, None] == graph.column_object[None, :]  # (S, C)

        self.cost_q = np.round(costs.costs * QUANT_SCALE).astype(np.int64)
        self.cost_q[~self.valid] = 0
        self.L = np.zeros((self.n_surfaces, self.n_cols), dtype=np.int64)
        self.L[self.valid] = 1 + np.abs(self.cost_q).sum(axis=2)[self.valid]

        self._forced = np.zeros(self.n_nodes, dtype=bool)
        self._forced_in = np.zeros(self.n_nodes, dtype=bool)
        tails, heads = self._structural_arcs()
        if np.any(self._forced & self._forced_in):
            raise FlowError("inter-object gap admits no configuration")
        self.a_cap = np.zeros(2 * len(tails), dtype=np.int64)
        self.a_cap[0::2] = INF_CAP
        self.a_head, self.a_next, self.node_first = _build_lists(
            self.n_nodes, tails, heads)

        self.tr_cap = self._terminal_caps()
        self.tree = np.zeros(self.n_nodes, dtype=np.int8)
        self.parent = np.full(self.n_nodes, PARENT_NONE, dtype=np.int64)
        self.ts_arr = np.zeros(self.n_nodes, dtype=np.int64)
        self.dist = np.zeros(self.n_nodes, dtype=np.int64)
        self.nxt_active = np.full(self.n_nodes, -1, dtype=np.int64)
        self.qstate = np.array([-1, -1, 1], dtype=np.int64)
        self.orphan_buf = np.zeros(2 * self.n_nodes + 16, dtype=np.int64)
        self.ostate = np.zeros(2, dtype=np.int64)

        self.dirty: set[int] = set()
        self.solved = False
        self.last_solution: SurfaceSolution | None = None
        self.stats = SolverStats()

    # -- construction -----------------------------------------------------

    def node_id(self, s: int, c: int, j: int) -> int:
        """Dense node id; j is the external (unflipped) node index."""
        jj = self.size - 1 - j if self.flip[s] else j
        return (s * self.n_cols + c) * self.size + jj

    def _structural_arcs(self):
        g = self.graph
        size = self.size
        C = self.n_cols
        p = g.params
        tails, heads = [], []

        def nid(s, c, j):
            return (s * C + c) * size + j

        sc = np.argwhere(self.valid)  # (k, 2): surface, column
        s_arr, c_arr = sc[:, 0], sc[:, 1]
        base = (s_arr * C + c_arr) * size

        # intra-column: (j) -> (j-1)
        j = np.arange(1, size)
        tails.append((base[:, None] + j[None, :]).ravel())
        heads.append((base[:, None] + j[None, :] - 1).ravel())

        # smoothness between adjacent columns, both directions
        if len(g.adjacency):
            ai, aj = g.adjacency[:, 0], g.adjacency[:, 1]
            same = g.column_object[ai] == g.column_object[aj]
            for s, (obj, _) in enumerate(g.surfaces):
                m = same & (g.column_object[ai] == obj)
                ii, jj = ai[m], aj[m]
                jid = np.arange(size)
                tgt = np.maximum(0, jid - p.smoothness)
                for a, b in ((ii, jj), (jj, ii)):
                    tails.append(((s * C + a) * size)[:, None] + jid[None, :])
                    heads.append(((s * C + b) * size)[:, None] + tgt[None, :])

        # inter-surface on shared columns: 0 <= upper - lower <= max
        for obj in np.unique(g.column_object):
            surfs = [s for s, (o, _) in enumerate(g.surfaces) if o == obj]
            if len(surfs) != 2:
                continue
            lo_s, up_s = (surfs[1], surfs[0]) if self.flip[surfs[0]] else (surfs[0], surfs[1])
            cols = g.columns_of_object(int(obj))
            jid = np.arange(size)
            tails.append(((lo_s * C + cols) * size)[:, None] + jid[None, :])
            heads.append(((up_s * C + cols) * size)[:, None] + jid[None, :])
            tgt = np.maximum(0, jid - p.inter_surface_max)
            tails.append(((up_s * C + cols) * size)[:, None] + jid[None, :])
            heads.append(((lo_s * C + cols) * size)[:, None] + tgt[None, :])

        # inter-object coupling: difference constraints on (xA, flipped xB)
        for (ca, cb), gap in zip(g.inter_object_pairs, g.inter_object_gap):
            sa = g._outer_surface(g.column_object[ca])
            sb = g._outer_surface(g.column_object[cb])
            if not self.flip[sb] or self.flip[sa]:
                raise FlowError("inter-object pair must couple an unflipped and a flipped surface")
            for (s_from, c_from, s_to, c_to, H) in (
                (sa, ca, sb, cb, int(gap) - (size - 1)),
                (sb, cb, sa, ca, (size - 1) + p.inter_object_max - int(gap)),
            ):
                for jj in range(size):
                    t = jj - H
                    if t <= 0:
                        continue
                    if t >= size:
                        if jj == 0:
                            raise FlowError(
                                "inter-object gap admits no configuration")
                        self._forced[nid(s_from, c_from, jj)] = True
                    elif jj == 0:
                        # the source node is a column base, which is in every
                        # closed set, so the target is unconditionally
                        # required; an arc alone cannot guarantee that because
                        # the base offset L only covers its own column
                        self._forced_in[nid(s_to, c_to, t)] = True
                    else:
                        tails.append(np.array([nid(s_from, c_from, jj)]))
                        heads.append(np.array([nid(s_to, c_to, t)]))

        tails = np.concatenate([np.asarray(t, dtype=np.int64).ravel() for t in tails])
        heads = np.concatenate([np.asarray(h, dtype=np.int64).ravel() for h in heads])
        return tails, heads

    def _internal_costs(self) -> np.ndarray:
        cq = self.cost_q.copy()
        for s in range(self.n_surfaces):
            if self.flip[s]:
                cq[s] = cq[s, :, ::-1]
        return cq

    def _terminal_caps(self) -> np.ndarray:
        cq = self._internal_costs()
        d = np.empty_like(cq)
        d[:, :, 0] = cq[:, :, 0] - self.L[:, :]
        d[:, :, 1:] = cq[:, :, 1:] - cq[:, :, :-1]
        d[~self.valid] = 0
        tr = (-d).reshape(-1)
        tr[self._forced] = -INF_CAP
        tr[self._forced_in] = INF_CAP
        return tr

    # -- solving ----------------------------------------------------------

    def solve(self) -> SurfaceSolution:
        """Cold solve (first call) or continuation; returns the optimum."""
        t0 = _time.perf_counter()
        if not self.solved:
            _init_roots(self.tr_cap, self.tree, self.parent, self.dist,
                        self.nxt_active, self.qstate)
        _, aug, orph = _run(self.a_head, self.a_next, self.a_cap, self.node_first,
                            self.tr_cap, self.tree, self.parent, self.ts_arr,
                            self.dist, self.nxt_active, self.qstate,
                            self.orphan_buf, self.ostate)
        self.solved = True
        self.dirty.clear()
        self.stats = SolverStats(augmentations=int(aug), orphans=int(orph),
                                 wall_ms=(_time.perf_counter() - t0) * 1e3)
        self.last_solution = self._extract()
        return self.last_solution

    def update_costs(self, edits) -> None:
        """Apply cost edits: iterable of (surface, column, node, new_cost)."""
        if not self.solved:
            raise FlowError("solve must run before update_costs")
        size = self.size
        touched_cols = set()
        for s, c, j, new in edits:
            if not (0 <= s < self.n_surfaces and 0 <= c < self.n_cols and 0 <= j < size):
                raise FlowError(f"unknown node ({s}, {c}, {j})")
            if not self.valid[s, c]:
                raise FlowError(f"surface {s} has no nodes on column {c}")
            q = int(round(new * QUANT_SCALE))
            old = int(self.cost_q[s, c, j])
            if q == old:
                continue
            self.cost_q[s, c, j] = q
            delta = q - old
            jj = size - 1 - j if self.flip[s] else j
            nid = (s * self.n_cols + c) * size + jj
            self.tr_cap[nid] -= delta
            self.dirty.add(nid)
            if jj + 1 < size:
                self.tr_cap[nid + 1] += delta
                self.dirty.add(nid + 1)
            touched_cols.add((s, c))
        # keep the non-emptiness offset large enough for the new costs
        for s, c in touched_cols:
            need = 1 + int(np.abs(self.cost_q[s, c]).sum())
            if need > self.L[s, c]:
                dl = need - self.L[s, c]
                self.L[s, c] = need
                base = (s * self.n_cols + c) * size
                self.tr_cap[base] += dl  # d(i,0) decreases by dl
                self.dirty.add(base)

    def resolve(self) -> SurfaceSolution:
        """Warm-restart solve after update_costs; exact optimum."""
        if not self.solved:
            raise FlowError("solve must run before resolve")
        if not self.dirty:
            return self.last_solution
        t0 = _time.perf_counter()
        dirty = np.fromiter(self.dirty, dtype=np.int64, count=len(self.dirty))
        dirty.sort()
        _warm_prep(dirty, self.a_head, self.a_next, self.node_first, self.tr_cap,
                   self.tree, self.parent, self.dist, self.nxt_active,
                   self.qstate, self.orphan_buf, self.ostate)
        _, aug, orph = _run(self.a_head, self.a_next, self.a_cap, self.node_first,
                            self.tr_cap, self.tree, self.parent, self.ts_arr,
                            self.dist, self.nxt_active, self.qstate,
                            self.orphan_buf, self.ostate)
        self.dirty.clear()
        self.stats = SolverStats(augmentations=int(aug), orphans=int(orph),
                                 wall_ms=(_time.perf_counter() - t0) * 1e3)
        self.last_solution = self._extract()
        return self.last_solution

    def _extract(self) -> SurfaceSolution:
        in_s = (self.tree == TREE_S).reshape(self.n_surfaces, self.n_cols, self.size)
        x = in_s.sum(axis=2).astype(np.int64) - 1
        if np.any(x[self.valid] < 0):
            raise FlowError("closed set lost a column base node")
        for s in range(self.n_surfaces):
            if self.flip[s]:
                x[s, self.valid[s]] = self.size - 1 - x[s, self.valid[s]]
        x[~self.valid] = -1
        sidx, cidx = np.nonzero(self.valid)
        obj_q = int(self.cost_q[sidx, cidx, x[sidx, cidx]].sum())
        return SurfaceSolution(x=x, objective_q=obj_q,
                               objective=obj_q / QUANT_SCALE)


# module-level operation wrappers matching the published API

def build_flow(g: ColumnGraph, costs: CostField) -> FlowState:
    return FlowState(g, costs)


def solve(fs: FlowState) -> SurfaceSolution:
    return fs.solve()


def update_costs(fs: FlowState, edits) -> None:
    fs.update_costs(edits)


def resolve(fs: FlowState) -> SurfaceSolution:
    return fs.resolve()
