#!/usr/bin/env python3
"""Benchmark cold solves vs warm edit/resolve rounds on a large graph.

Prints median wall times for a 2000-column x 61-node two-surface graph:
the cold full solve and the warm resolve after a 10-column nudge-style
cost rewrite (the interactive editing path).
"""
import argparse
import time

import numpy as np

from surfseg.costs import CostField
from surfseg.graph import GraphParams, straight_column_graph
from surfseg.maxflow import build_flow


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--columns", type=int, default=2000)
    ap.add_argument("--rounds", type=int, default=25)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    params = GraphParams()
    g = straight_column_graph(args.columns, params, n_objects=1,
                              surfaces_per_object=2)
    rng = np.random.default_rng(args.seed)
    size = params.column_size
    # Per-column noisy valley around a drifting target: like the cost modes
    # produce in practice.  Unstructured uniform noise is a worst-case flow
    # instance and benchmarks nothing realistic.
    t = np.arange(args.columns)
    field = np.empty((2, args.columns, size))
    for s in range(2):
        target = (size / 2 + (size / 4) * np.sin(t / 60.0 + 2 * s)
                  + rng.normal(0, 1.0, size=args.columns))
        dist = np.abs(np.arange(size)[None, :] - target[:, None]) / size
        field[s] = dist + rng.uniform(0, 0.05, size=(args.columns, size))
    costs = CostField(costs=field.round(3), provenance="bench")

    build_flow(g, costs).solve()            # jit warm-up

    cold = []
    for _ in range(5):
        t0 = time.perf_counter()
        build_flow(g, costs).solve()
        cold.append(time.perf_counter() - t0)

    fs = build_flow(g, costs)
    fs.solve()
    warm = []
    for _ in range(args.rounds):
        c0 = int(rng.integers(0, args.columns - 10))
        target = int(rng.integers(0, size))
        edits = [(1, c, j, 0.0 if abs(j - target) < 2 else 1.0)
                 for c in range(c0, c0 + 10) for j in range(size)]
        t0 = time.perf_counter()
        fs.update_costs(edits)
        fs.resolve()
        warm.append(time.perf_counter() - t0)

    cold_ms = 1e3 * float(np.median(cold))
    warm_ms = 1e3 * float(np.median(warm))
    print(f"graph: {args.columns} columns x {size} nodes x 2 surfaces")
    print(f"cold solve   median {cold_ms:8.1f} ms  (n={len(cold)})")
    print(f"warm resolve median {warm_ms:8.1f} ms  (n={len(warm)}, "
          f"{100 * warm_ms / cold_ms:.1f}% of cold)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
