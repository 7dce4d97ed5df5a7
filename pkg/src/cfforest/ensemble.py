"""Tree-ensemble representation, interchange format and reference evaluator.

The interchange document (schema version "cfforest/1") is a JSON object:

    {version, voting, split_semantics, n_classes, base_scores[],
     tree_weights[], features[], trees[], optional isolation_forest}

Each tree stores internal nodes in a flat array with index-based children;
a negative child index -(j+1) points at leaf j of the same tree.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import features as fs
from .errors import SchemaError

HARD = "hard"
SOFT = "soft"


@dataclass
class Node:
    f: int
    tau: float
    left: int
    right: int


@dataclass
class Leaf:
    scores: np.ndarray
    n_samples: int = 0


@dataclass
class Tree:
    nodes: list
    leaves: list
    root: int

    def n_leaves(self):
        return len(self.leaves)

    def leaf_depths(self):
        """Root-to-leaf edge counts, indexed by leaf."""
        depths = [0] * len(self.leaves)

        def walk(child, d):
            if child < 0:
                depths[-(child + 1)] = d
            else:
                node = self.nodes[child]
                walk(node.left, d + 1)
                walk(node.right, d + 1)

        walk(self.root, 0)
        return depths


@dataclass
class Ensemble:
    trees: list
    weights: list
    base_scores: list
    voting: str
    split_semantics: str
    n_classes: int
    feature_space: fs.FeatureSpace
    isolation_forest: object = None  # plausibility.IsolationModel, if present

    def validate(self):
        if self.voting not in (HARD, SOFT):
            raise SchemaError("unknown voting scheme %r" % self.voting)
        if self.split_semantics not in fs.SEMANTICS:
            raise SchemaError("unknown split semantics %r" % self.split_semantics)
        if self.n_classes < 2:
            raise SchemaError("need at least two classes")
        if len(self.weights) != len(self.trees):
            raise SchemaError("tree_weights length mismatch")
        if len(self.base_scores) != self.n_classes:
            raise SchemaError("base_scores length mismatch")
        for v in list(self.weights) + list(self.base_scores):
            if not math.isfinite(v):
                raise SchemaError("non-finite weight or base score")
        for t, tree in enumerate(self.trees):
            _validate_tree(tree, t, self.feature_space, self.n_classes)
            if self.voting == HARD:
                if self.weights[t] != 1.0:
                    raise SchemaError("tree %d: hard voting requires weight 1" % t)
                for leaf in tree.leaves:
                    s = np.asarray(leaf.scores)
                    if not (np.count_nonzero(s == 1.0) == 1 and np.count_nonzero(s) == 1):
                        raise SchemaError("tree %d: non-one-hot leaf under hard voting" % t)


def _validate_tree(tree, t, space, n_classes):
    if not tree.leaves:
        raise SchemaError("tree %d: no leaves" % t)
    seen_nodes = set()
    seen_leaves = set()

    def walk(child):
        if child < 0:
            j = -(child + 1)
            if j >= len(tree.leaves) or j in seen_leaves:
                raise SchemaError("tree %d: dangling child %d" % (t, child))
            seen_leaves.add(j)
            return
        if child >= len(tree.nodes) or child in seen_nodes:
            raise SchemaError("tree %d: dangling child %d" % (t, child))
        seen_nodes.add(child)
        node = tree.nodes[child]
        if not (0 <= node.f < len(space)):
            raise SchemaError("tree %d: invalid feature index %d" % (t, node.f))
        spec = space[node.f]
        if spec.kind in (fs.NUMERICAL, fs.ORDINAL) and not (spec.lb <= node.tau <= spec.ub):
            raise SchemaError("tree %d: threshold %r outside feature bounds" % (t, node.tau))
        walk(node.left)
        walk(node.right)

    walk(tree.root)
    if len(seen_nodes) != len(tree.nodes) or len(seen_leaves) != len(tree.leaves):
        raise SchemaError("tree %d: unreachable nodes or leaves" % t)
    for j, leaf in enumerate(tree.leaves):
        if len(np.atleast_1d(leaf.scores)) != n_classes:
            raise SchemaError("tree %d leaf %d: score-vector length mismatch" % (t, j))


def route_leaf(tree, point, semantics):
    """Index of the unique leaf whose root-to-leaf conditions point satisfies."""
    child = tree.root
    while child >= 0:
        node = tree.nodes[child]
        v = point[node.f]
        go_left = v <= node.tau if semantics == fs.LEFT_CLOSED else v < node.tau
        child = node.left if go_left else node.right
    return -(child + 1)


def route_leaf_batch(tree, X, semantics):
    """Vectorized route_leaf over the rows of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    stack = [(tree.root, np.arange(n))]
    while stack:
        child, idx = stack.pop()
        if idx.size == 0:
            continue
        if child < 0:
            out[idx] = -(child + 1)
            continue
        node = tree.nodes[child]
        v = X[idx, node.f]
        go_left = v <= node.tau if semantics == fs.LEFT_CLOSED else v < node.tau
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def predict_scores(ens, point):
    """Per-class scores s_y = b_y + sum_t w_t * leaf scores, plus the argmax
    label (ties broken by lowest class index)."""
    s = np.asarray(ens.base_scores, dtype=float).copy()
    for tree, w in zip(ens.trees, ens.weights):
        leaf = route_leaf(tree, point, ens.split_semantics)
        s += w * np.asarray(tree.leaves[leaf].scores, dtype=float)
    return s, int(np.argmax(s))


def predict_scores_batch(ens, X):
    X = np.asarray(X, dtype=float)
    S = np.tile(np.asarray(ens.base_scores, dtype=float), (X.shape[0], 1))
    for tree, w in zip(ens.trees, ens.weights):
        leaves = route_leaf_batch(tree, X, ens.split_semantics)
        scores = np.asarray([np.asarray(l.scores, dtype=float) for l in tree.leaves])
        S += w * scores[leaves]
    return S, np.argmax(S, axis=1)


# ---------------------------------------------------------------------------
# Interchange format


def _tree_from_doc(doc, t):
    try:
        nodes = [Node(int(n["f"]), float(n["tau"]), int(n["left"]), int(n["right"]))
                 for n in doc["nodes"]]
        leaves = [Leaf(np.asarray(l["scores"], dtype=float), int(l.get("n_samples", 0)))
                  for l in doc["leaves"]]
        root = int(doc["root"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError("tree %d: malformed document (%s)" % (t, e))
    return Tree(nodes, leaves, root)


def _tree_to_doc(tree):
    return {
        "nodes": [{"f": n.f, "tau": n.tau, "left": n.left, "right": n.right}
                  for n in tree.nodes],
        "leaves": [{"scores": [float(v) for v in np.atleast_1d(l.scores)],
                    "n_samples": int(l.n_samples)} for l in tree.leaves],
        "root": tree.root,
    }


def _feature_from_doc(doc):
    try:
        return fs.FeatureSpec(
            name=str(doc["name"]),
            kind=str(doc.get("kind", fs.NUMERICAL)),
            lb=float(doc.get("lb", 0.0)),
            ub=float(doc.get("ub", 1.0)),
            group=doc.get("group"),
            ordinal_grid=doc.get("ordinal_grid"),
            actionability=str(doc.get("actionability", "free")),
            alpha=doc.get("alpha"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError("malformed feature block (%s)" % e)


def _feature_to_doc(spec):
    doc = {"name": spec.name, "kind": spec.kind, "lb": spec.lb, "ub": spec.ub,
           "actionability": spec.actionability}
    if spec.group is not None:
        doc["group"] = spec.group
    if spec.ordinal_grid is not None:
        doc["ordinal_grid"] = list(spec.ordinal_grid)
    if spec.alpha is not None:
        doc["alpha"] = spec.alpha
    return doc


def load_ensemble(data):
    """Parse and validate an interchange document (bytes, str or dict)."""
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise SchemaError("invalid JSON: %s" % e)
    if data.get("version") != "cfforest/1":
        raise SchemaError("unsupported schema version %r" % data.get("version"))
    try:
        space = fs.FeatureSpace(_feature_from_doc(f) for f in data["features"])
        ens = Ensemble(
            trees=[_tree_from_doc(t, i) for i, t in enumerate(data["trees"])],
            weights=[float(w) for w in data["tree_weights"]],
            base_scores=[float(b) for b in data["base_scores"]],
            voting=str(data["voting"]),
            split_semantics=str(data["split_semantics"]),
            n_classes=int(data["n_classes"]),
            feature_space=space,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError("malformed document (%s)" % e)
    ens.validate()
    if data.get("isolation_forest") is not None:
        from . import plausibility
        ens.isolation_forest = plausibility.load_isolation(
            data["isolation_forest"], ens.feature_space)
    return ens


def load_ensemble_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return load_ensemble(fh.read())


def dump_ensemble(ens):
    """Inverse of load_ensemble; returns the interchange dict."""
    doc = {
        "version": "cfforest/1",
        "voting": ens.voting,
        "split_semantics": ens.split_semantics,
        "n_classes": ens.n_classes,
        "base_scores": [float(b) for b in ens.base_scores],
        "tree_weights": [float(w) for w in ens.weights],
        "features": [_feature_to_doc(s) for s in ens.feature_space.specs],
        "trees": [_tree_to_doc(t) for t in ens.trees],
    }
    if ens.isolation_forest is not None:
        from . import plausibility
        doc["isolation_forest"] = plausibility.dump_isolation(ens.isolation_forest)
    return doc


def point_from_query(space, query):
    """Dense feature vector from {name: value} (or an ordered list)."""
    if isinstance(query, dict):
        missing = [n for n in space.names() if n not in query]
        if missing:
            raise SchemaError("query missing features: %s" % ", ".join(missing))
        return np.asarray([float(query[n]) for n in space.names()])
    vec = np.asarray(query, dtype=float)
    if vec.shape != (len(space),):
        raise SchemaError("query has %d values, expected %d" % (vec.size, len(space)))
    return vec
