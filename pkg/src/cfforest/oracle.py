"""Exhaustive ground-truth search over the exact finite counterfactual grid.

Enumerates every combination of interval indices and categorical choices,
scores a representative point per cell with the reference evaluator, and
keeps the cheapest cell meeting the target margin (and the plausibility
bound, when supplied).  No pruning beyond actionability: this is the
independent certificate used to check the branch-and-bound path.
"""

import time

import numpy as np

from . import ensemble as ec
from . import features as fs
from . import plausibility as pl
from .cpmodel import COST_QUANTUM, GROUP, build_model
from .errors import GridTooLargeError
from .solver import INFEASIBLE, OPTIMAL, Solution

DEFAULT_CAP = 10 ** 7
_CHUNK = 200_000


def _candidates(model):
    """Per-variable admissible value lists after actionability pruning."""
    cands = []
    for vi, var in enumerate(model.vars):
        if var.kind == GROUP:
            vals = [v for v in range(var.n_values) if var.init_mask >> v & 1]
        else:
            vals = [v for v in range(var.init_lo, var.init_hi + 1)
                    if v not in var.init_removed]
        cands.append(vals)
    return cands


def brute_force_optimum(ens, query, target, *, norm=1, eps_c=1e-7,
                        actionability=None, isolation=None, cap=DEFAULT_CAP):
    t0 = time.perf_counter()
    model = build_model(ens, query, target, norm=norm, eps_c=eps_c,
                        actionability=actionability, isolation=isolation)
    cands = _candidates(model)
    sizes = [len(c) for c in cands]
    total = 1
    for s in sizes:
        total *= s
    if total > cap:
        raise GridTooLargeError("grid has %d cells (cap %d)" % (total, cap))

    # realized feature values and integer costs per candidate, per variable
    nfeat = len(ens.feature_space)
    val_tables = []   # per var: (n_cands,) value, or one-hot rows for groups
    cost_tables = []
    for vi, var in enumerate(model.vars):
        cost_tables.append(np.asarray([var.cost[v] for v in cands[vi]],
                                      dtype=np.int64))
        if var.kind == GROUP:
            rows = np.zeros((len(cands[vi]), len(var.members)))
            for i, v in enumerate(cands[vi]):
                rows[i, v] = 1.0
            val_tables.append(rows)
        else:
            vals = []
            for v in cands[vi]:
                if var.partition is not None:
                    vals.append(fs.realize_value(var.partition,
                                                 model.query[var.feature], v,
                                                 ens.split_semantics, var.grid))
                else:
                    vals.append(float(v))
            val_tables.append(np.asarray(vals))

    divisors = np.ones(len(sizes), dtype=np.int64)
    for i in range(len(sizes) - 2, -1, -1):
        divisors[i] = divisors[i + 1] * sizes[i + 1]
    sizes_arr = np.asarray(sizes, dtype=np.int64)

    best_cost = None
    best_flat = None
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        idx = (flat[:, None] // divisors) % sizes_arr        # (n, nvars)
        points = np.tile(model.query, (flat.size, 1))
        cost = np.zeros(flat.size, dtype=np.int64)
        for vi, var in enumerate(model.vars):
            cost += cost_tables[vi][idx[:, vi]]
            if var.kind == GROUP:
                points[:, var.members] = val_tables[vi][idx[:, vi]]
            else:
                points[:, var.feature] = val_tables[vi][idx[:, vi]]
        S, _ = ec.predict_scores_batch(ens, points)
        feas = np.ones(flat.size, dtype=bool)
        for y in model.rivals:
            feas &= (S[:, target] - S[:, y]) >= eps_c
        if isolation is not None:
            H = pl.average_path_length_batch(isolation, points,
                                             ens.split_semantics)
            feas &= H >= isolation.h_min
        if not feas.any():
            continue
        c = np.where(feas, cost, np.iinfo(np.int64).max)
        i = int(np.argmin(c))
        if best_cost is None or c[i] < best_cost:
            best_cost = int(c[i])
            best_flat = int(flat[i])

    sol = Solution(status=INFEASIBLE, oracle=True, build_time=model.build_time)
    if best_cost is not None:
        idx = [(best_flat // int(divisors[i])) % sizes[i] for i in range(len(sizes))]
        assignment = [cands[vi][idx[vi]] for vi in range(len(cands))]
        point = model.realize_point(assignment)
        sol.status = OPTIMAL
        sol.objective = best_cost / COST_QUANTUM
        sol.best_bound = sol.objective
        sol.point = {ens.feature_space[f].name: float(point[f])
                     for f in range(nfeat)}
        sol.changed_features = [ens.feature_space[f].name
                                for f in range(nfeat)
                                if point[f] != model.query[f]]
    sol.solve_time = time.perf_counter() - t0 - model.build_time
    if best_cost is not None:
        sol.trace.append((sol.solve_time, sol.objective))
    return sol
