"""Isolation-forest plausibility: corrected path lengths and the hard
average-path-length bound H(x) >= H_min.

The anomaly machinery follows the standard isolation-forest conventions:
score(x) = -2^(-H(x)/c_max) and decision(x) = score(x) - offset, where H is
the mean corrected path length across trees.  decision(x) >= 0 is equivalent
to H(x) >= H_min with H_min = -c_max * log2(-offset), which is the linear
form enforced inside the solver.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import ensemble as ec
from .errors import SchemaError

EULER_GAMMA = 0.5772156649015329


def correction_c(m):
    """Average unsuccessful-search path length in a BST of m points."""
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * math.log(m - 1) + 2.0 * EULER_GAMMA - 2.0 * (m - 1) / m


def leaf_path_length(tree, leaf, depth=None):
    """Corrected path length of one leaf: depth plus c(n_samples)."""
    if depth is None:
        depth = tree.leaf_depths()[leaf]
    m = tree.leaves[leaf].n_samples
    return float(depth) + correction_c(m)


@dataclass
class IsolationModel:
    trees: list
    max_samples: int
    offset: float
    contamination: float = 0.1
    feature_space: object = None
    leaf_lengths: list = field(default_factory=list)  # per tree, per leaf

    def __post_init__(self):
        if not (-1.0 < self.offset < 0.0):
            raise SchemaError("isolation offset must lie in (-1, 0)")
        if not self.leaf_lengths:
            for tree in self.trees:
                depths = tree.leaf_depths()
                self.leaf_lengths.append(
                    [leaf_path_length(tree, j, depths[j])
                     for j in range(len(tree.leaves))])

    @property
    def c_max(self):
        return correction_c(self.max_samples)

    @property
    def h_min(self):
        return h_min_threshold(self)


def h_min_threshold(model):
    """Minimum average corrected path length equivalent to decision(x) >= 0."""
    return -model.c_max * math.log2(-model.offset)


def average_path_length(model, point, semantics):
    """Reference H(x): mean corrected path length across isolation trees."""
    total = 0.0
    for tree, lengths in zip(model.trees, model.leaf_lengths):
        leaf = ec.route_leaf(tree, point, semantics)
        total += lengths[leaf]
    return total / len(model.trees)


def anomaly_score(model, point, semantics):
    return -(2.0 ** (-average_path_length(model, point, semantics) / model.c_max))


def decision_function(model, point, semantics):
    """Independent reference scorer; plausible iff >= 0."""
    return anomaly_score(model, point, semantics) - model.offset


def average_path_length_batch(model, X, semantics):
    X = np.asarray(X, dtype=float)
    total = np.zeros(X.shape[0])
    for tree, lengths in zip(model.trees, model.leaf_lengths):
        leaves = ec.route_leaf_batch(tree, X, semantics)
        total += np.asarray(lengths)[leaves]
    return total / len(model.trees)


def load_isolation(doc, feature_space):
    try:
        trees = [ec._tree_from_doc(t, i) for i, t in enumerate(doc["trees"])]
        model = IsolationModel(
            trees=trees,
            max_samples=int(doc["max_samples"]),
            offset=float(doc["offset"]),
            contamination=float(doc.get("contamination", 0.1)),
            feature_space=feature_space,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError("malformed isolation_forest block (%s)" % e)
    for t, tree in enumerate(model.trees):
        ec._validate_tree(tree, t, feature_space, 1)
    return model


def dump_isolation(model):
    return {
        "trees": [ec._tree_to_doc(t) for t in model.trees],
        "max_samples": model.max_samples,
        "offset": model.offset,
        "contamination": model.contamination,
    }
