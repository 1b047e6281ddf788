"""Clustered random forest: one forest per (object, mesh cluster).

Plain Breiman forests (bootstrap, Gini, mtry feature subsets) fit on
per-node feature vectors; prediction is the fraction of trees voting for
the boundary class on each graph node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_TREES_PER_FOREST = 50
MTRY = 5
DEPTH_CAP = 20
MIN_LEAF = 2


class RFError(Exception):
    pass


@njit(cache=True)
def _fit_tree(X, y, boot, mtry, depth_cap, min_leaf, seed):
    """CART with Gini impurity on a bootstrap sample; returns node tables."""
    np.random.seed(seed)
    n = len(boot)
    d = X.shape[1]
    max_nodes = 2 * n + 1
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thresh = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    prob = np.zeros(max_nodes)
    idx = boot.copy()
    # stack of (node, start, end, depth)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0] = (0, 0, n, 0)
    top = 1
    n_nodes = 1
    pool = np.empty(d, dtype=np.int64)
    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        m = end - start
        npos = 0
        for i in range(start, end):
            npos += y[idx[i]]
        prob[node] = npos / m
        if npos == 0 or npos == m or depth >= depth_cap or m < 2 * min_leaf:
            continue
        # sample mtry distinct features (partial Fisher-Yates)
        for k in range(d):
            pool[k] = k
        kmax = min(mtry, d)
        best_gain = -1.0
        best_f = -1
        best_t = 0.0
        parent_imp = 1.0 - (npos / m) ** 2 - ((m - npos) / m) ** 2
        for k in range(kmax):
            r = k + np.random.randint(0, d - k)
            pool[k], pool[r] = pool[r], pool[k]
            f = pool[k]
            vals = np.empty(m)
            labs = np.empty(m, dtype=np.int64)
            for i in range(m):
                vals[i] = X[idx[start + i], f]
                labs[i] = y[idx[start + i]]
            order = np.argsort(vals, kind="mergesort")
            pos_left = 0
            for i in range(m - 1):
                pos_left += labs[order[i]]
                if vals[order[i]] == vals[order[i + 1]]:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                pl = pos_left / nl
                pr = (npos - pos_left) / nr
                gini = (nl * (1 - pl * pl - (1 - pl) * (1 - pl))
                        + nr * (1 - pr * pr - (1 - pr) * (1 - pr))) / m
                gain = parent_imp - gini
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = 0.5 * (vals[order[i]] + vals[order[i + 1]])
        if best_f < 0 or best_gain <= 1e-15:
            continue
        # partition idx[start:end] in place
        i, j = start, end - 1
        while i <= j:
            if X[idx[i], best_f] <= best_t:
                i += 1
            else:
                idx[i], idx[j] = idx[j], idx[i]
                j -= 1
        feat[node] = best_f
        thresh[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top] = (n_nodes, start, i, depth + 1)
        stack[top + 1] = (n_nodes + 1, i, end, depth + 1)
        top += 2
        n_nodes += 2
    return (feat[:n_nodes], thresh[:n_nodes], left[:n_nodes],
            right[:n_nodes], prob[:n_nodes])


@njit(cache=True)
def _predict_tree(feat, thresh, left, right, prob, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thresh[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = prob[node]
    return out


@dataclass
class Forest:
    trees: list               # [(feat, thresh, left, right, prob), ...]
    oob_accuracy: float

    def vote_fraction(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += _predict_tree(*t, X) >= 0.5
        return votes / len(self.trees)


@dataclass
class ClusteredRFModel:
    forests: dict             # (object_id, cluster_id) -> Forest
    n_features: int


def train_forest(X: np.ndarray, y: np.ndarray,
                 trees: int = DEFAULT_TREES_PER_FOREST, seed: int = 0,
                 mtry: int = MTRY, depth_cap: int = DEPTH_CAP,
                 min_leaf: int = MIN_LEAF) -> Forest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n = len(y)
    if y.min() == y.max():
        raise RFError("single-class training set")
    rng = np.random.default_rng(seed)
    grown = []
    oob_votes = np.zeros(n)
    oob_count = np.zeros(n)
    for _ in range(trees):
        boot = rng.integers(0, n, size=n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        t = _fit_tree(X, y, boot, mtry, depth_cap, min_leaf, tree_seed)
        grown.append(t)
        oob = np.ones(n, dtype=bool)
        oob[np.unique(boot)] = False
        if oob.any():
            oob_votes[oob] += _predict_tree(*t, X[oob]) >= 0.5
            oob_count[oob] += 1
    seen = oob_count > 0
    acc = float(np.mean((oob_votes[seen] / oob_count[seen] >= 0.5) == y[seen])
                ) if seen.any() else float("nan")
    return Forest(trees=grown, oob_accuracy=acc)


def _gather(training):
    """Group node samples by (object, cluster).

    Each training item: (column_object, column_cluster, features, labels)
    with features (C, size, F) and labels (C, size) in {0, 1}.
    """
    groups: dict = {}
    for col_obj, col_clu, feats, labels in training:
        C, size, F = feats.shape
        for c in range(C):
            key = (int(col_obj[c]), int(col_clu[c]))
            groups.setdefault(key, ([], []))
            groups[key][0].append(feats[c])
            groups[key][1].append(labels[c])
    return {k: (np.concatenate([x.reshape(-1, x.shape[-1]) for x in xs]),
                np.concatenate([y.ravel() for y in ys]))
            for k, (xs, ys) in groups.items()}


def train_clustered_rf(training, trees_per_forest: int = DEFAULT_TREES_PER_FOREST,
                       seed: int = 0) -> ClusteredRFModel:
    groups = _gather(training)
    bad = sorted(k for k, (_x, y) in groups.items() if y.min() == y.max())
    if bad:
        raise RFError(f"single-class clusters (object, cluster): {bad}")
    rng = np.random.default_rng(seed)
    forests = {}
    n_features = None
    for key in sorted(groups):
        X, y = groups[key]
        n_features = X.shape[1]
        forests[key] = train_forest(X, y, trees=trees_per_forest,
                                    seed=int(rng.integers(0, 2**31 - 1)))
    return ClusteredRFModel(forests=forests, n_features=n_features)


def rf_node_probabilities(model: ClusteredRFModel, col_obj, col_clu,
                          feats: np.ndarray) -> np.ndarray:
    """Per-node boundary probability (tree-vote fraction): (C, size)."""
    C, size, F = feats.shape
    out = np.zeros((C, size))
    keys = [(int(o), int(k)) for o, k in zip(col_obj, col_clu)]
    for key in sorted(set(keys)):
        if key not in model.forests:
            raise RFError(f"no forest for (object, cluster) {key}")
        cols = np.array([c for c, k in enumerate(keys) if k == key])
        X = np.ascontiguousarray(feats[cols].reshape(-1, F), dtype=np.float64)
        out[cols] = model.forests[key].vote_fraction(X).reshape(len(cols), size)
    return out
