"""Finite-domain counterfactual model: interval/categorical variables, leaf
boxes, integer-scaled score terms and per-interval cost tables.

Scores are scaled by 10^9 and rounded to integers; costs are quantized with
a 10^6 quantum so the whole objective is exact integer arithmetic.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import ensemble as ec
from . import features as fs
from .errors import InputError

SCORE_SCALE = 10 ** 9
COST_QUANTUM = 10 ** 6
DEFAULT_EPS_C = 1e-7

INTERVAL = "interval"
GROUP = "group"


@dataclass
class Var:
    kind: str
    name: str
    n_values: int
    feature: int = -1               # interval vars: feature index
    members: list = field(default_factory=list)  # group vars: member features
    partition: object = None
    grid: list = None
    cost: np.ndarray = None          # int64 cost per value
    cost_order: list = None          # value indices sorted by (cost, value)
    init_lo: int = 0
    init_hi: int = 0
    init_removed: tuple = ()         # excluded values inside [init_lo, init_hi]
    init_mask: int = 0               # group vars: allowed-member bitmask
    query_value: int = 0             # value index of the query
    ref_count: int = 0               # split nodes referencing this var


class LeafBlock:
    """Stacked per-leaf boxes for one family of trees (main or isolation)."""

    def __init__(self, n_ivars, n_gvars):
        self.lo_rows = []
        self.hi_rows = []
        self.mask_rows = []
        self.tree_id = []
        self.leaf_id = []
        self.n_ivars = n_ivars
        self.n_gvars = n_gvars

    def add(self, tree, leaf, lo, hi, mask):
        self.lo_rows.append(lo)
        self.hi_rows.append(hi)
        self.mask_rows.append(mask)
        self.tree_id.append(tree)
        self.leaf_id.append(leaf)

    def finalize(self, n_trees):
        n = len(self.lo_rows)
        self.lo = np.asarray(self.lo_rows, dtype=np.int64).reshape(n, self.n_ivars)
        self.hi = np.asarray(self.hi_rows, dtype=np.int64).reshape(n, self.n_ivars)
        self.mask = np.asarray(self.mask_rows, dtype=np.int64).reshape(n, self.n_gvars)
        self.tree_id = np.asarray(self.tree_id, dtype=np.int64)
        self.leaf_id = np.asarray(self.leaf_id, dtype=np.int64)
        self.n = len(self.lo_rows)
        self.n_trees = n_trees
        # reduceat segment starts (leaves are emitted tree by tree)
        self.seg = np.searchsorted(self.tree_id, np.arange(n_trees))
        del self.lo_rows, self.hi_rows, self.mask_rows


@dataclass
class CfModel:
    ens: object
    query: np.ndarray
    target: int
    rivals: list
    norm: int
    eps_c: float
    e_c: int
    allow_identity: bool
    vars: list
    var_of_feature: dict       # feature index -> (var index, member position)
    ivar_pos: dict             # var index -> column in interval arrays
    gvar_pos: dict
    main: LeafBlock
    b_diff: np.ndarray         # (n_rivals,) integer base-score differences
    d_diff: np.ndarray         # (n_rivals, n_main_leaves) integer score diffs
    iso: object = None         # IsolationModel when plausibility is attached
    iso_block: LeafBlock = None
    iso_len: np.ndarray = None  # integer-scaled corrected path length per leaf
    iso_rhs: int = 0
    build_time: float = 0.0
    time_limit: float = None

    def realize_point(self, assignment):
        """Concrete feature vector from one value per variable."""
        point = np.array(self.query, dtype=float)
        for vi, var in enumerate(self.vars):
            v = assignment[vi]
            if var.kind == GROUP:
                for pos, f in enumerate(var.members):
                    point[f] = 1.0 if pos == v else 0.0
            elif var.partition is not None:
                point[var.feature] = fs.realize_value(
                    var.partition, self.query[var.feature], v,
                    self.ens.split_semantics, var.grid)
            else:
                point[var.feature] = float(v)
        return point

    def objective_of(self, assignment):
        return int(sum(var.cost[assignment[vi]] for vi, var in enumerate(self.vars)))


def _path_boxes(model_vars, ivar_pos, gvar_pos, var_of_feature, tree, space, semantics):
    """Yield (leaf index, interval lo/hi rows, group masks) for every leaf."""
    n_i = len(ivar_pos)
    n_g = len(gvar_pos)
    rows = []

    def walk(child, lo, hi, mask):
        if child < 0:
            rows.append((-(child + 1), lo, hi, mask))
            return
        node = tree.nodes[child]
        vi, member_pos = var_of_feature[node.f]
        var = model_vars[vi]
        llo, lhi, lmask = list(lo), list(hi), list(mask)
        rlo, rhi, rmask = list(lo), list(hi), list(mask)
        if var.kind == GROUP:
            col = gvar_pos[vi]
            bit = 1 << member_pos
            lmask[col] &= ~bit          # left branch: member not selected
            rmask[col] &= bit           # right branch: member selected
        elif var.partition is not None:
            part = var.partition
            col = ivar_pos[vi]
            tau = node.tau
            if tau in part.threshold_index:
                m = part.threshold_index[tau]
                lhi[col] = min(lhi[col], m)
                rlo[col] = max(rlo[col], m + 1)
            else:
                # threshold at or outside the bounds: one side is constant
                spec = space[node.f]
                always_left = tau >= spec.ub if semantics == fs.LEFT_CLOSED \
                    else tau > spec.ub
                if always_left:
                    rlo[col] = rhi[col] + 1   # right branch unreachable
                else:
                    llo[col] = lhi[col] + 1   # left branch unreachable
        else:
            # binary feature: which of {0,1} routes left
            col = ivar_pos[vi]
            zero_left = (0.0 <= node.tau) if semantics == fs.LEFT_CLOSED \
                else (0.0 < node.tau)
            one_left = (1.0 <= node.tau) if semantics == fs.LEFT_CLOSED \
                else (1.0 < node.tau)
            left_vals = {v for v, gl in ((0, zero_left), (1, one_left)) if gl}
            right_vals = {0, 1} - left_vals
            for vals, xlo, xhi in ((left_vals, llo, lhi), (right_vals, rlo, rhi)):
                if not vals:
                    xlo[col] = xhi[col] + 1
                else:
                    xlo[col] = max(xlo[col], min(vals))
                    xhi[col] = min(xhi[col], max(vals))
        walk(node.left, llo, lhi, lmask)
        walk(node.right, rlo, rhi, rmask)

    full_masks = [(1 << len(model_vars[vi].members)) - 1
                  for vi in sorted(gvar_pos, key=gvar_pos.get)]
    init_lo = [0] * n_i
    init_hi = [model_vars[vi].n_values - 1 for vi in sorted(ivar_pos, key=ivar_pos.get)]
    walk(tree.root, init_lo, init_hi, full_masks)
    return rows


def build_model(ens, query, target, *, norm=1, eps_c=DEFAULT_EPS_C,
                allow_identity=False, actionability=None, isolation=None,
                time_limit=None):
    """Compile (ensemble, query, target) into a CfModel.

    actionability maps feature names to overrides; isolation attaches the
    plausibility constraint (partitions are rebuilt over the union of
    ensemble and isolation-forest thresholds).
    """
    t0 = time.perf_counter()
    space = ens.feature_space
    point = ec.point_from_query(space, query)
    if not (0 <= target < ens.n_classes):
        raise InputError("unknown target class %d" % target)
    if eps_c <= 0:
        raise InputError("eps_c must be positive")
    _, label = ec.predict_scores(ens, point)
    if label == target and not allow_identity:
        raise InputError("query already classified as target class %d" % target)
    overrides = dict(actionability or {})
    semantics = ens.split_semantics
    extra_trees = isolation.trees if isolation is not None else ()

    # --- variables -------------------------------------------------------
    model_vars = []
    var_of_feature = {}
    done_groups = {}
    for f, spec in enumerate(space.specs):
        act = overrides.get(spec.name, spec.actionability)
        if spec.kind == fs.CATEGORICAL:
            gid = spec.group
            if gid in done_groups:
                vi = done_groups[gid]
                var_of_feature[f] = (vi, model_vars[vi].members.index(f))
                continue
            members = space.groups[gid]
            if len(members) > 62:
                raise InputError("one-hot group %r too large" % gid)
            cur = [space[m].name for m in members if point[m] == 1.0]
            if len(cur) != 1:
                raise InputError("query does not select exactly one member of group %r" % gid)
            qpos = next(pos for pos, m in enumerate(members) if point[m] == 1.0)
            alpha = space[members[0]].effective_alpha()
            cost = np.zeros(len(members), dtype=np.int64)
            cost[:] = int(round(COST_QUANTUM * alpha))
            cost[qpos] = 0
            mask = (1 << len(members)) - 1
            acts = {overrides.get(space[m].name, space[m].actionability)
                    for m in members}
            if "immutable" in acts:
                mask = 1 << qpos
            var = Var(GROUP, "group:%s" % gid, len(members), members=list(members),
                      cost=cost, init_mask=mask, query_value=qpos)
            var.cost_order = sorted(range(len(members)), key=lambda v: (cost[v], v))
            vi = len(model_vars)
            model_vars.append(var)
            done_groups[gid] = vi
            var_of_feature[f] = (vi, members.index(f))
        elif spec.kind == fs.BINARY:
            q = int(round(point[f]))
            alpha = spec.effective_alpha()
            cost = np.zeros(2, dtype=np.int64)
            cost[1 - q] = int(round(COST_QUANTUM * alpha))
            lo, hi = 0, 1
            if act == "immutable":
                lo = hi = q
            elif act == "increase_only":
                lo = q
            elif act == "decrease_only":
                hi = q
            var = Var(INTERVAL, spec.name, 2, feature=f, cost=cost,
                      init_lo=lo, init_hi=hi, query_value=q)
            var.cost_order = sorted(range(2), key=lambda v: (cost[v], v))
            vi = len(model_vars)
            model_vars.append(var)
            var_of_feature[f] = (vi, -1)
        else:
            part = fs.build_partition(ens, f, extra_trees)
            alpha = spec.effective_alpha()
            cost = np.asarray(fs.cost_table(part, point[f], norm, alpha,
                                            semantics, COST_QUANTUM), dtype=np.int64)
            mq = fs.interval_of(part, point[f], semantics)
            lo, hi = 0, part.n_intervals - 1
            removed = []
            if spec.kind == fs.ORDINAL and spec.ordinal_grid:
                for m in range(part.n_intervals):
                    if not fs.grid_values_in(part, m, spec.ordinal_grid, semantics):
                        removed.append(m)
            if act == "immutable":
                lo = hi = mq
            elif act == "increase_only":
                lo = mq
            elif act == "decrease_only":
                hi = mq
            removed = tuple(m for m in removed if lo <= m <= hi and m != mq)
            var = Var(INTERVAL, spec.name, part.n_intervals, feature=f,
                      partition=part, grid=spec.ordinal_grid, cost=cost,
                      init_lo=lo, init_hi=hi, init_removed=removed, query_value=mq)
            var.cost_order = sorted(range(part.n_intervals),
                                    key=lambda v: (cost[v], v))
            vi = len(model_vars)
            model_vars.append(var)
            var_of_feature[f] = (vi, -1)

    ivar_pos = {vi: i for i, vi in enumerate(
        v for v, var in enumerate(model_vars) if var.kind == INTERVAL)}
    gvar_pos = {vi: i for i, vi in enumerate(
        v for v, var in enumerate(model_vars) if var.kind == GROUP)}

    # branching statistics: how many split nodes reference each variable
    for tree in list(ens.trees) + list(extra_trees):
        for node in tree.nodes:
            model_vars[var_of_feature[node.f][0]].ref_count += 1

    # --- leaf boxes and score terms -------------------------------------
    main = LeafBlock(len(ivar_pos), len(gvar_pos))
    scaled = []
    for t, tree in enumerate(ens.trees):
        rows = _path_boxes(model_vars, ivar_pos, gvar_pos, var_of_feature,
                           tree, space, semantics)
        rows.sort(key=lambda r: r[0])
        for leaf, lo, hi, mask in rows:
            main.add(t, leaf, lo, hi, mask)
            p = np.asarray(tree.leaves[leaf].scores, dtype=float)
            scaled.append(np.round(SCORE_SCALE * ens.weights[t] * p).astype(np.int64))
    main.finalize(len(ens.trees))
    scaled = np.asarray(scaled, dtype=np.int64)

    rivals = [y for y in range(ens.n_classes) if y != target]
    b = np.round(SCORE_SCALE * np.asarray(ens.base_scores, dtype=float)).astype(np.int64)
    b_diff = np.asarray([b[target] - b[y] for y in rivals], dtype=np.int64)
    d_diff = np.stack([scaled[:, target] - scaled[:, y] for y in rivals])
    e_c = max(1, int(round(SCORE_SCALE * eps_c)))

    model = CfModel(
        ens=ens, query=point, target=target, rivals=rivals, norm=norm,
        eps_c=eps_c, e_c=e_c, allow_identity=allow_identity, vars=model_vars,
        var_of_feature=var_of_feature, ivar_pos=ivar_pos, gvar_pos=gvar_pos,
        main=main, b_diff=b_diff, d_diff=d_diff, time_limit=time_limit)

    if isolation is not None:
        _attach_iso(model, isolation)
    model.build_time = time.perf_counter() - t0
    return model


def _attach_iso(model, iso):
    if iso.feature_space is not None and len(iso.feature_space) != len(model.ens.feature_space):
        raise InputError("isolation forest feature space mismatch")
    block = LeafBlock(len(model.ivar_pos), len(model.gvar_pos))
    lengths = []
    for t, tree in enumerate(iso.trees):
        rows = _path_boxes(model.vars, model.ivar_pos, model.gvar_pos,
                           model.var_of_feature, tree, model.ens.feature_space,
                           model.ens.split_semantics)
        rows.sort(key=lambda r: r[0])
        for leaf, lo, hi, mask in rows:
            block.add(t, leaf, lo, hi, mask)
            lengths.append(int(round(SCORE_SCALE * iso.leaf_lengths[t][leaf])))
    block.finalize(len(iso.trees))
    model.iso = iso
    model.iso_block = block
    model.iso_len = np.asarray(lengths, dtype=np.int64)
    # conservative floor: never reject a truly plausible point
    model.iso_rhs = len(iso.trees) * int(SCORE_SCALE * iso.h_min)


def attach_plausibility(model, iso):
    """Rebuild the model with the isolation-forest constraint attached.

    A full rebuild is required because the feature partitions must cover the
    union of ensemble and isolation-forest thresholds.
    """
    return build_model(
        model.ens, model.query, model.target, norm=model.norm,
        eps_c=model.eps_c, allow_identity=model.allow_identity,
        isolation=iso, time_limit=model.time_limit)
