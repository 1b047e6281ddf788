"""Model persistence on the versioned binary container (deterministic bytes)."""
from __future__ import annotations

import numpy as np

from .. import container
from .naf import NAFModel, NAFTree
from .rf import ClusteredRFModel, Forest
from .voi import AdaBoostModel


def save_voi_model(model: AdaBoostModel, path: str) -> None:
    container.save(path, {
        "feature": model.feature.astype(np.int64),
        "threshold": model.threshold.astype(np.float64),
        "polarity": model.polarity.astype(np.int64),
        "alpha": model.alpha.astype(np.float64),
    }, meta={"kind": "voi-adaboost", "window_mm": model.window_mm})


def load_voi_model(path: str) -> AdaBoostModel:
    arrays, meta = container.load(path)
    if meta.get("kind") != "voi-adaboost":
        raise container.ContainerError(f"{path}: not a VOI detector file")
    return AdaBoostModel(feature=arrays["feature"],
                         threshold=arrays["threshold"],
                         polarity=arrays["polarity"], alpha=arrays["alpha"],
                         window_mm=float(meta["window_mm"]))


def save_naf_model(model: NAFModel, path: str) -> None:
    arrays: dict = {}
    for i, t in enumerate(model.trees):
        p = f"t{i:04d}."
        arrays[p + "tests"] = t.tests.astype(np.int64)
        arrays[p + "threshold"] = t.threshold.astype(np.float64)
        arrays[p + "left"] = t.left.astype(np.int64)
        arrays[p + "right"] = t.right.astype(np.int64)
        arrays[p + "leaf_id"] = t.leaf_id.astype(np.int64)
        arrays[p + "leaf_patches"] = t.leaf_patches.astype(np.float32)
        arrays[p + "leaf_counts"] = t.leaf_counts.astype(np.int64)
    container.save(path, arrays, meta={
        "kind": "naf", "patch_shape": list(model.patch_shape),
        "n_trees": len(model.trees)})


def load_naf_model(path: str) -> NAFModel:
    arrays, meta = container.load(path)
    if meta.get("kind") != "naf":
        raise container.ContainerError(f"{path}: not a NAF model file")
    trees = []
    for i in range(int(meta["n_trees"])):
        p = f"t{i:04d}."
        trees.append(NAFTree(tests=arrays[p + "tests"],
                             threshold=arrays[p + "threshold"],
                             left=arrays[p + "left"],
                             right=arrays[p + "right"],
                             leaf_id=arrays[p + "leaf_id"],
                             leaf_patches=arrays[p + "leaf_patches"],
                             leaf_counts=arrays[p + "leaf_counts"]))
    return NAFModel(patch_shape=tuple(meta["patch_shape"]), trees=trees)


def save_rf_model(model: ClusteredRFModel, path: str) -> None:
    arrays: dict = {}
    keys = sorted(model.forests)
    oob = []
    for obj, clu in keys:
        forest = model.forests[(obj, clu)]
        oob.append(forest.oob_accuracy)
        fp = f"f{obj:02d}.{clu:04d}."
        for j, (feat, thresh, left, right, prob) in enumerate(forest.trees):
            tp = fp + f"t{j:04d}."
            arrays[tp + "feat"] = feat.astype(np.int64)
            arrays[tp + "thresh"] = thresh.astype(np.float64)
            arrays[tp + "left"] = left.astype(np.int64)
            arrays[tp + "right"] = right.astype(np.int64)
            arrays[tp + "prob"] = prob.astype(np.float64)
    container.save(path, arrays, meta={
        "kind": "clustered-rf", "n_features": model.n_features,
        "keys": [list(k) for k in keys], "oob": oob,
        "trees_per_forest": len(model.forests[keys[0]].trees) if keys else 0})


def load_rf_model(path: str) -> ClusteredRFModel:
    arrays, meta = container.load(path)
    if meta.get("kind") != "clustered-rf":
        raise container.ContainerError(f"{path}: not a clustered RF file")
    forests = {}
    n_trees = int(meta["trees_per_forest"])
    for (obj, clu), oob in zip(meta["keys"], meta["oob"]):
        fp = f"f{obj:02d}.{clu:04d}."
        trees = []
        for j in range(n_trees):
            tp = fp + f"t{j:04d}."
            trees.append((arrays[tp + "feat"], arrays[tp + "thresh"],
                          arrays[tp + "left"], arrays[tp + "right"],
                          arrays[tp + "prob"]))
        forests[(int(obj), int(clu))] = Forest(trees=trees,
                                               oob_accuracy=float(oob))
    return ClusteredRFModel(forests=forests,
                            n_features=int(meta["n_features"]))
