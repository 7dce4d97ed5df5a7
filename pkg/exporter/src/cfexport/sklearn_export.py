"""Dump fitted scikit-learn tree ensembles into the interchange format.

Source trees route with x <= tau going left, so exported documents use
left_closed split semantics.
"""

import numpy as np

from .manifest import ExportError, check_manifest

VERSION = "cfforest/1"


def _require_fitted(model, attr):
    if not hasattr(model, attr):
        raise ExportError("model is not fitted (missing %s)" % attr)


def _check_feature_count(model, manifest):
    n = len(manifest["features"])
    have = int(getattr(model, "n_features_in_", n))
    if have != n:
        raise ExportError("manifest has %d features, model expects %d"
                          % (n, have))


def _tree_doc(t, scores_of, feature_map=None):
    """Interchange tree from a fitted sklearn tree_ structure.

    scores_of maps a source node id to the leaf score list; feature_map
    optionally reindexes feature ids into manifest positions.
    """
    nodes = []
    leaves = []

    def visit(i):
        if t.children_left[i] < 0:
            leaves.append({"scores": scores_of(i),
                           "n_samples": int(t.n_node_samples[i])})
            return -len(leaves)
        f = int(t.feature[i])
        if feature_map is not None:
            f = int(feature_map[f])
        idx = len(nodes)
        nodes.append({"f": f, "tau": float(t.threshold[i]),
                      "left": 0, "right": 0})
        nodes[idx]["left"] = visit(int(t.children_left[i]))
        nodes[idx]["right"] = visit(int(t.children_right[i]))
        return idx

    root = visit(0)
    return {"nodes": nodes, "leaves": leaves, "root": root}


def export_forest(model, manifest):
    """Interchange document for a fitted RandomForestClassifier.

    voting "soft" keeps the per-leaf class fractions with w_t = 1/|T|
    (matching the averaged-probability prediction of the source model);
    voting "hard" replaces each leaf by a one-hot vote for its majority
    class with w_t = 1.
    """
    check_manifest(manifest)
    voting = manifest.get("voting", "soft")
    if voting not in ("soft", "hard"):
        raise ExportError("voting must be soft or hard, got %r" % voting)
    _require_fitted(model, "estimators_")
    _check_feature_count(model, manifest)
    n_classes = int(model.n_classes_)
    n_trees = len(model.estimators_)

    trees = []
    for est in model.estimators_:
        t = est.tree_

        def scores_of(i, t=t):
            row = np.asarray(t.value[i][0], dtype=float)
            total = row.sum()
            p = row / total if total > 0 else row
            if voting == "hard":
                vote = np.zeros_like(p)
                vote[int(np.argmax(p))] = 1.0
                p = vote
            return [float(v) for v in p]

        trees.append(_tree_doc(t, scores_of))

    weights = [1.0] * n_trees if voting == "hard" else [1.0 / n_trees] * n_trees
    return {
        "version": VERSION,
        "voting": voting,
        "split_semantics": "left_closed",
        "n_classes": n_classes,
        "base_scores": [0.0] * n_classes,
        "tree_weights": weights,
        "features": [dict(f) for f in manifest["features"]],
        "trees": trees,
    }


def export_isolation(model, manifest):
    """Isolation block for a fitted IsolationForest.

    Leaves carry the training sample counts the reference scorer needs for
    the path-length correction; offset and subsample size are copied from
    the fitted model so decision signs line up with the source.
    """
    check_manifest(manifest)
    _require_fitted(model, "estimators_")
    _require_fitted(model, "offset_")
    _check_feature_count(model, manifest)

    trees = []
    for est, feats in zip(model.estimators_, model.estimators_features_):
        trees.append(_tree_doc(est.tree_, lambda i: [0.0], feature_map=feats))

    contamination = model.contamination
    if not isinstance(contamination, (int, float)):
        contamination = 0.1
    return {
        "trees": trees,
        "max_samples": int(model.max_samples_),
        "offset": float(model.offset_),
        "contamination": float(contamination),
        "features": [dict(f) for f in manifest["features"]],
    }
