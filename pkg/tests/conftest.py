import itertools

import numpy as np
import pytest

from surfseg.graph import GraphParams, straight_column_graph
from surfseg.maxflow import build_flow
from surfseg.costs import CostField


def small_params(**kw):
    defaults = dict(smoothness=1, inter_surface_max=3, inter_object_max=4,
                    column_size=5, node_spacing=0.2)
    defaults.update(kw)
    return GraphParams(**defaults)


def random_small_graph(rng, max_columns=3, max_size=6, max_surfaces=2,
                       two_objects=False):
    """A random straight graph plus random costs, small enough to enumerate."""
    size = int(rng.integers(2, max_size + 1))
    n_cols = int(rng.integers(1, max_columns + 1))
    n_surf = int(rng.integers(1, max_surfaces + 1))
    params = GraphParams(
        smoothness=int(rng.integers(0, 3)),
        inter_surface_max=int(rng.integers(0, size)),
        inter_object_max=int(rng.integers(0, 2 * size)),
        column_size=size, node_spacing=0.2)
    g = straight_column_graph(n_cols, params,
                              n_objects=2 if two_objects else 1,
                              surfaces_per_object=n_surf)
    if two_objects:
        pairs = [(i, n_cols + i) for i in range(n_cols)
                 if rng.random() < 0.7]
        g.inter_object_pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        # gaps chosen so a feasible configuration exists (x=0 is feasible
        # when 0 <= gap <= inter_object_max)
        g.inter_object_gap = rng.integers(
            0, params.inter_object_max + 1,
            size=len(g.inter_object_pairs)).astype(np.int64)
    costs = CostField(costs=np.round(
        rng.uniform(0, 4, size=(g.n_surfaces, g.n_columns, size)), 3),
        provenance="test")
    return g, costs


def enumerate_minimum(g, costs):
    """Exhaustive optimum over all feasible configurations; None if infeasible.

    Returns (best objective sum, best x) using the same per-surface column
    masking convention as solutions (-1 off-object).
    """
    rows = []
    for s, (obj, _surf) in enumerate(g.surfaces):
        for c in range(g.n_columns):
            if g.column_object[c] == obj:
                rows.append((s, c))
    best = None
    best_x = None
    for combo in itertools.product(range(g.column_size), repeat=len(rows)):
        x = np.full((g.n_surfaces, g.n_columns), -1, dtype=np.int64)
        for (s, c), v in zip(rows, combo):
            x[s, c] = v
        if not g.feasible(x):
            continue
        total = sum(costs.costs[s, c, x[s, c]] for s, c in rows)
        if best is None or total < best - 1e-12:
            best = total
            best_x = x
    return best, best_x


@pytest.fixture(scope="session")
def solved_feasibility_registry():
    """Solutions recorded here are feasibility-checked at session teardown."""
    registry = []
    yield registry
    for g, x in registry:
        assert g.feasible(x), "recorded solution violates graph constraints"


def assert_feasible(g, sol):
    assert g.feasible(sol.x), "solution violates constraints"


def solve_checked(g, costs):
    fs = build_flow(g, costs)
    sol = fs.solve()
    assert_feasible(g, sol)
    return fs, sol
