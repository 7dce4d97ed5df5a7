"""Synthetic ensembles, isolation forests and query sets for tests and
desk-scale benchmarks.  Everything is seeded and deterministic."""

import numpy as np

from . import ensemble as ec
from . import features as fs
from . import plausibility as pl


def make_feature_space(n_numerical=3, n_binary=0, n_groups=0, group_size=3,
                       n_ordinal=0, lb=0.0, ub=10.0, alpha=None):
    specs = []
    for i in range(n_numerical):
        specs.append(fs.FeatureSpec("num%d" % i, fs.NUMERICAL, lb, ub, alpha=alpha))
    for i in range(n_ordinal):
        grid = [lb + j * (ub - lb) / 10.0 for j in range(11)]
        specs.append(fs.FeatureSpec("ord%d" % i, fs.ORDINAL, lb, ub,
                                    ordinal_grid=grid, alpha=alpha))
    for i in range(n_binary):
        specs.append(fs.FeatureSpec("bin%d" % i, fs.BINARY, 0.0, 1.0, alpha=alpha))
    for g in range(n_groups):
        for j in range(group_size):
            specs.append(fs.FeatureSpec("cat%d_%d" % (g, j), fs.CATEGORICAL,
                                        0.0, 1.0, group="g%d" % g, alpha=alpha))
    return fs.FeatureSpace(specs)


def _random_tree(rng, space, max_depth, n_classes, voting, pools):
    nodes = []
    leaves = []

    def leaf():
        if voting == ec.HARD:
            scores = np.zeros(n_classes)
            scores[rng.integers(n_classes)] = 1.0
        else:
            scores = rng.dirichlet(np.ones(n_classes))
        leaves.append(ec.Leaf(scores, int(rng.integers(1, 50))))
        return -len(leaves)

    def grow(depth):
        if depth >= max_depth or rng.random() < 0.15 * depth:
            return leaf()
        f = int(rng.integers(len(space)))
        spec = space[f]
        if spec.kind in (fs.NUMERICAL, fs.ORDINAL):
            tau = float(rng.choice(pools[f]))
        else:
            tau = 0.5
        idx = len(nodes)
        nodes.append(ec.Node(f, tau, 0, 0))
        nodes[idx].left = grow(depth + 1)
        nodes[idx].right = grow(depth + 1)
        return idx

    root = grow(0)
    if root < 0:
        # force at least one split so the tree is non-trivial
        f = int(rng.integers(len(space)))
        spec = space[f]
        tau = float(rng.choice(pools[f])) if spec.kind in (fs.NUMERICAL, fs.ORDINAL) else 0.5
        nodes.append(ec.Node(f, tau, root, leaf()))
        root = len(nodes) - 1
    return ec.Tree(nodes, leaves, root)


def _threshold_pools(rng, space, per_feature):
    pools = []
    for spec in space.specs:
        if spec.kind in (fs.NUMERICAL, fs.ORDINAL):
            lo, hi = spec.lb, spec.ub
            vals = np.round(rng.uniform(lo + 0.05 * (hi - lo),
                                        hi - 0.05 * (hi - lo), per_feature), 4)
            pools.append(sorted(set(vals.tolist())))
        else:
            pools.append([0.5])
    return pools


def make_ensemble(n_trees=4, depth=3, space=None, voting=ec.SOFT,
                  semantics=fs.LEFT_CLOSED, n_classes=2, seed=0,
                  thresholds_per_feature=6):
    rng = np.random.default_rng(seed)
    if space is None:
        space = make_feature_space()
    pools = _threshold_pools(rng, space, thresholds_per_feature)
    trees = [_random_tree(rng, space, depth, n_classes, voting, pools)
             for _ in range(n_trees)]
    weights = [1.0] * n_trees if voting == ec.HARD else [1.0 / n_trees] * n_trees
    ens = ec.Ensemble(trees=trees, weights=weights,
                      base_scores=[0.0] * n_classes, voting=voting,
                      split_semantics=semantics, n_classes=n_classes,
                      feature_space=space)
    ens.validate()
    return ens


def make_isolation(space, n_trees=10, depth=4, seed=0, offset=-0.5,
                   max_samples=64, contamination=0.1,
                   thresholds_per_feature=4):
    rng = np.random.default_rng(seed)
    pools = _threshold_pools(rng, space, thresholds_per_feature)
    trees = []
    for _ in range(n_trees):
        tree = _random_tree(rng, space, depth, 1, ec.SOFT, pools)
        for leaf in tree.leaves:
            leaf.scores = np.zeros(1)
            leaf.n_samples = int(rng.integers(1, max_samples))
        trees.append(tree)
    return pl.IsolationModel(trees=trees, max_samples=max_samples,
                             offset=offset, contamination=contamination,
                             feature_space=space)


def make_points(space, n, seed=0):
    """Random in-bounds points; one-hot groups select a single member."""
    rng = np.random.default_rng(seed)
    X = np.zeros((n, len(space)))
    for f, spec in enumerate(space.specs):
        if spec.kind == fs.NUMERICAL:
            X[:, f] = rng.uniform(spec.lb, spec.ub, n)
        elif spec.kind == fs.ORDINAL:
            X[:, f] = rng.choice(spec.ordinal_grid, n)
        elif spec.kind == fs.BINARY:
            X[:, f] = rng.integers(0, 2, n)
    for gid, members in space.groups.items():
        choice = rng.integers(0, len(members), n)
        for pos, f in enumerate(members):
            X[:, f] = (choice == pos).astype(float)
    return X
