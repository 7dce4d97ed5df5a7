"""Branch-and-bound search over a CfModel with constraint propagation.

Propagation reaches a fixpoint of leaf-support filtering, exactly-one leaf
forcing, the rival-class score bound and the separable cost bound.  Search is
best-first on the cost lower bound with a deepest-first tie-break, branching
only on feature variables (cheapest value first); leaf variables are implied.
Every incumbent is validated against the reference evaluator (and the
reference isolation-forest scorer when plausibility is attached) before it is
recorded.
"""

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from . import ensemble as ec
from . import plausibility as pl
from .cpmodel import COST_QUANTUM, GROUP

NEG_INF = np.iinfo(np.int64).min // 4

OPTIMAL = "OPTIMAL"
FEASIBLE = "FEASIBLE"
INFEASIBLE = "INFEASIBLE"
TIMEOUT = "TIMEOUT"


@dataclass
class Solution:
    status: str
    point: dict = None
    objective: float = None
    best_bound: float = None
    trace: list = field(default_factory=list)
    bound_trace: list = field(default_factory=list)
    build_time: float = 0.0
    solve_time: float = 0.0
    changed_features: list = field(default_factory=list)
    oracle: bool = False
    nodes: int = 0

    def to_doc(self):
        doc = {
            "status": self.status,
            "objective": self.objective,
            "bound": self.best_bound,
            "build_time_s": self.build_time,
            "solve_time_s": self.solve_time,
            "point": self.point,
            "changed_features": self.changed_features,
            "trace": [[t, c] for t, c in self.trace],
            "bound_trace": [[t, b] for t, b in self.bound_trace],
        }
        if self.oracle:
            doc["oracle"] = True
        return doc


class _State:
    __slots__ = ("lo", "hi", "removed", "gmask", "depth")

    def __init__(self, lo, hi, removed, gmask, depth):
        self.lo = lo
        self.hi = hi
        self.removed = removed       # tuple of sorted tuples, per interval var
        self.gmask = gmask
        self.depth = depth

    def child(self):
        return _State(list(self.lo), list(self.hi),
                      list(self.removed), list(self.gmask), self.depth + 1)


CONFLICT = None


def _alive(block, lo, hi, removed, gmask):
    """Boolean leaf-support mask for one leaf block under current domains."""
    if block.n == 0:
        return np.zeros(0, dtype=bool)
    ov_lo = np.maximum(block.lo, lo)
    ov_hi = np.minimum(block.hi, hi)
    cnt = ov_hi - ov_lo + 1
    for col, rem in enumerate(removed):
        if rem:
            r = np.asarray(rem)
            cnt[:, col] -= (np.searchsorted(r, ov_hi[:, col], "right")
                            - np.searchsorted(r, ov_lo[:, col], "left"))
    ok = (cnt > 0).all(axis=1) if cnt.size else np.ones(block.n, dtype=bool)
    if block.n_gvars:
        ok &= ((block.mask & np.asarray(gmask)) != 0).all(axis=1)
    return ok


def _seg_max(values, alive, seg, n_trees):
    masked = np.where(alive, values, NEG_INF)
    return np.maximum.reduceat(masked, seg) if n_trees else np.zeros(0, dtype=np.int64)


def _domain_size(model, state, vi):
    var = model.vars[vi]
    if var.kind == GROUP:
        return bin(state.gmask[model.gvar_pos[vi]]).count("1")
    col = model.ivar_pos[vi]
    lo, hi = state.lo[col], state.hi[col]
    rem = state.removed[col]
    return hi - lo + 1 - sum(1 for r in rem if lo <= r <= hi)


def _min_cost(model, state, vi):
    var = model.vars[vi]
    if var.kind == GROUP:
        mask = state.gmask[model.gvar_pos[vi]]
        best = None
        for v in var.cost_order:
            if mask >> v & 1:
                return int(var.cost[v]), v
        return best
    col = model.ivar_pos[vi]
    lo, hi = state.lo[col], state.hi[col]
    rem = state.removed[col]
    for v in var.cost_order:
        if lo <= v <= hi and v not in rem:
            return int(var.cost[v]), v
    return None


def propagate(model, state, ub=None):
    """Fixpoint propagation; returns (alive_main, alive_iso) or CONFLICT.

    With an incumbent cost ub, also applies cost-based domain filtering:
    a value survives only if its cost plus the other variables' minimum
    costs stays below ub.
    """
    lo = np.asarray(state.lo, dtype=np.int64)
    hi = np.asarray(state.hi, dtype=np.int64)
    if np.any(lo > hi):
        return CONFLICT
    for col, rem in enumerate(state.removed):
        if rem and hi[col] - lo[col] + 1 <= sum(1 for r in rem if lo[col] <= r <= hi[col]):
            return CONFLICT
    gmask = list(state.gmask)
    if any(m == 0 for m in gmask):
        return CONFLICT

    main = model.main
    iso = model.iso_block
    alive_m = _alive(main, lo, hi, state.removed, gmask)
    alive_i = _alive(iso, lo, hi, state.removed, gmask) if iso is not None else None

    while True:
        changed = False
        counts = np.bincount(main.tree_id[alive_m], minlength=main.n_trees)
        if np.any(counts == 0):
            return CONFLICT
        if iso is not None:
            icounts = np.bincount(iso.tree_id[alive_i], minlength=iso.n_trees)
            if np.any(icounts == 0):
                return CONFLICT

        # rival-class score bound, with per-leaf filtering
        for r in range(len(model.rivals)):
            tmax = _seg_max(model.d_diff[r], alive_m, main.seg, main.n_trees)
            total = int(model.b_diff[r]) + int(tmax.sum())
            if total < model.e_c:
                return CONFLICT
            slack = model.e_c - total + tmax[main.tree_id]
            kill = alive_m & (model.d_diff[r] < slack)
            if kill.any():
                alive_m &= ~kill
                changed = True

        # isolation path-length bound
        if iso is not None:
            lmax = _seg_max(model.iso_len, alive_i, iso.seg, iso.n_trees)
            total = int(lmax.sum())
            if total < model.iso_rhs:
                return CONFLICT
            slack = model.iso_rhs - total + lmax[iso.tree_id]
            kill = alive_i & (model.iso_len < slack)
            if kill.any():
                alive_i &= ~kill
                changed = True

        # cost filtering against the incumbent: the cheapest completion of
        # any kept value must undercut ub (per-feature costs are unimodal
        # around the query interval, so the kept set is a contiguous window)
        if ub is not None:
            mins = []
            for vi, var in enumerate(model.vars):
                if var.kind == GROUP:
                    mask = gmask[model.gvar_pos[vi]]
                    best = next(int(var.cost[v]) for v in var.cost_order
                                if mask >> v & 1)
                else:
                    col = model.ivar_pos[vi]
                    c = var.cost[lo[col]:hi[col] + 1]
                    rem = [r - lo[col] for r in state.removed[col]
                           if lo[col] <= r <= hi[col]]
                    if rem:
                        keep = np.ones(c.size, dtype=bool)
                        keep[rem] = False
                        c = c[keep]
                    best = int(c.min())
                mins.append(best)
            total_min = sum(mins)
            if total_min >= ub:
                return CONFLICT
            for vi, var in enumerate(model.vars):
                theta = ub - (total_min - mins[vi])
                if var.kind == GROUP:
                    pos = model.gvar_pos[vi]
                    mask = gmask[pos]
                    new = 0
                    for v in range(var.n_values):
                        if mask >> v & 1 and var.cost[v] < theta:
                            new |= 1 << v
                    if new != mask:
                        if new == 0:
                            return CONFLICT
                        gmask[pos] = new
                        changed = True
                else:
                    col = model.ivar_pos[vi]
                    allowed = var.cost[lo[col]:hi[col] + 1] < theta
                    if not allowed.any():
                        return CONFLICT
                    nl = lo[col] + int(np.argmax(allowed))
                    nh = lo[col] + allowed.size - 1 - int(np.argmax(allowed[::-1]))
                    if nl > lo[col] or nh < hi[col]:
                        lo[col] = nl
                        hi[col] = nh
                        changed = True

        # exactly-one: a tree reduced to a single leaf forces its box
        for block, alive in ((main, alive_m), (iso, alive_i)):
            if block is None:
                continue
            rows = np.flatnonzero(alive)
            counts = np.bincount(block.tree_id[rows], minlength=block.n_trees)
            if np.any(counts == 0):
                return CONFLICT
            forced = rows[counts[block.tree_id[rows]] == 1]
            if forced.size == 0:
                continue
            newlo = np.maximum(lo, block.lo[forced].max(axis=0))
            newhi = np.minimum(hi, block.hi[forced].min(axis=0))
            if np.any(newlo != lo) or np.any(newhi != hi):
                lo, hi = newlo, newhi
                if np.any(lo > hi):
                    return CONFLICT
                changed = True
            for col in range(block.n_gvars):
                m = gmask[col] & int(np.bitwise_and.reduce(block.mask[forced, col]))
                if m != gmask[col]:
                    if m == 0:
                        return CONFLICT
                    gmask[col] = m
                    changed = True
        if not changed:
            break
        for col, rem in enumerate(state.removed):
            if rem and hi[col] - lo[col] + 1 <= sum(1 for r in rem if lo[col] <= r <= hi[col]):
                return CONFLICT
        alive_m &= _alive(main, lo, hi, state.removed, gmask)
        if iso is not None:
            alive_i &= _alive(iso, lo, hi, state.removed, gmask)

    state.lo = [int(v) for v in lo]
    state.hi = [int(v) for v in hi]
    state.gmask = gmask
    return alive_m, alive_i


def _seg_len(block, t):
    end = block.seg[t + 1] if t + 1 < block.n_trees else block.n
    return end - block.seg[t]


def lower_bound(model, state):
    """Sum over features of the cheapest value still in the domain."""
    total = 0
    for vi in range(len(model.vars)):
        mc = _min_cost(model, state, vi)
        if mc is None:
            return None
        total += mc[0]
    return total


def _root_state(model):
    lo, hi, removed, gmask = [], [], [], []
    for vi, var in enumerate(model.vars):
        if var.kind == GROUP:
            gmask.append(var.init_mask)
        else:
            lo.append(var.init_lo)
            hi.append(var.init_hi)
            removed.append(tuple(sorted(var.init_removed)))
    return _State(lo, hi, removed, gmask, 0)


def _assignment(model, state):
    out = []
    for vi, var in enumerate(model.vars):
        if var.kind == GROUP:
            mask = state.gmask[model.gvar_pos[vi]]
            out.append(mask.bit_length() - 1)
        else:
            col = model.ivar_pos[vi]
            rem = state.removed[col]
            out.append(next(v for v in range(state.lo[col], state.hi[col] + 1)
                            if v not in rem))
    return out


def _validate_point(model, point):
    s, _ = ec.predict_scores(model.ens, point)
    for y in model.rivals:
        if not (s[model.target] - s[y] >= model.eps_c):
            return False
    if model.iso is not None:
        h = pl.average_path_length(model.iso, point, model.ens.split_semantics)
        if not (h >= model.iso.h_min):
            return False
    return True


def solve(model, budget=None, seed=0, workers=1):
    """Branch-and-bound to proven optimality (or the best incumbent at the
    time limit).  Deterministic for fixed inputs; seed and workers are
    accepted for interface compatibility with portfolio runs."""
    t0 = time.perf_counter()
    limit = budget if budget is not None else model.time_limit
    sol = Solution(status=INFEASIBLE, build_time=model.build_time)
    root = _root_state(model)
    heap = []
    counter = 0
    if propagate(model, root) is not CONFLICT:
        lb = lower_bound(model, root)
        if lb is not None:
            heapq.heappush(heap, (lb, -root.depth, counter, root))
            counter += 1

    inc_cost = None
    inc_assignment = None
    best_bound = None
    nodes = 0
    timed_out = False

    while heap:
        if limit is not None and time.perf_counter() - t0 > limit:
            timed_out = True
            break
        bound, _, _, state = heapq.heappop(heap)
        if best_bound is None or bound > best_bound:
            best_bound = bound
            sol.bound_trace.append((time.perf_counter() - t0,
                                    bound / COST_QUANTUM))
        if inc_cost is not None and bound >= inc_cost:
            break  # heap is bound-ordered: nothing cheaper remains
        if propagate(model, state, inc_cost) is CONFLICT:
            continue

        # dive with chronological backtracking: assign, per branch variable,
        # the cheapest value that survives propagation; keep the refutation
        # siblings on a local stack and fall back to them on dead ends.  When
        # an improving incumbent is recorded, the remaining stack goes to the
        # heap and search returns to best-first order.
        frames = []
        while state is not None:
            if limit is not None and time.perf_counter() - t0 > limit:
                timed_out = True
                break
            nodes += 1
            dead = inc_cost is not None and \
                lower_bound(model, state) >= inc_cost
            improved = False
            if not dead:
                unfixed = [vi for vi in range(len(model.vars))
                           if _domain_size(model, state, vi) > 1]
                if not unfixed:
                    assignment = _assignment(model, state)
                    cost = model.objective_of(assignment)
                    if inc_cost is None or cost < inc_cost:
                        point = model.realize_point(assignment)
                        if _validate_point(model, point):
                            inc_cost = cost
                            inc_assignment = assignment
                            sol.trace.append((time.perf_counter() - t0,
                                              cost / COST_QUANTUM))
                            improved = True
                    dead = True
            if dead:
                if improved:
                    for frame in frames:
                        lb = lower_bound(model, frame)
                        if lb is not None and lb < inc_cost:
                            heapq.heappush(heap,
                                           (lb, -frame.depth, counter, frame))
                            counter += 1
                    frames = []
                # chronological backtrack into the nearest viable sibling
                state = None
                while frames:
                    frame = frames.pop()
                    if propagate(model, frame, inc_cost) is CONFLICT:
                        continue
                    if inc_cost is not None and \
                            lower_bound(model, frame) >= inc_cost:
                        continue
                    state = frame
                    break
                continue

            vi = max(unfixed, key=lambda v: (model.vars[v].ref_count, -v))
            var = model.vars[vi]
            committed = None
            while True:
                mc = _min_cost(model, state, vi)
                if mc is None:
                    break
                _, value = mc
                trial = state.child()
                if var.kind == GROUP:
                    col = model.gvar_pos[vi]
                    trial.gmask[col] = 1 << value
                else:
                    col = model.ivar_pos[vi]
                    trial.lo[col] = trial.hi[col] = value
                if propagate(model, trial, inc_cost) is CONFLICT:
                    # value is infeasible under this state; delete it
                    if var.kind == GROUP:
                        state.gmask[col] &= ~(1 << value)
                    else:
                        state.removed[col] = tuple(
                            sorted(set(state.removed[col]) | {value}))
                    continue
                committed = trial
                break
            if committed is None:
                state = None
                while frames:
                    frame = frames.pop()
                    if propagate(model, frame, inc_cost) is CONFLICT:
                        continue
                    if inc_cost is not None and \
                            lower_bound(model, frame) >= inc_cost:
                        continue
                    state = frame
                    break
                continue
            refute = state.child()
            if var.kind == GROUP:
                refute.gmask[col] = state.gmask[col] & ~(1 << value)
            else:
                refute.removed[col] = tuple(
                    sorted(set(refute.removed[col]) | {value}))
            frames.append(refute)
            state = committed
        if timed_out:
            break

    sol.nodes = nodes
    sol.solve_time = time.perf_counter() - t0
    if inc_cost is not None:
        point = model.realize_point(inc_assignment)
        sol.objective = inc_cost / COST_QUANTUM
        sol.point = {model.ens.feature_space[f].name: float(point[f])
                     for f in range(len(point))}
        sol.changed_features = [
            model.ens.feature_space[f].name for f in range(len(point))
            if point[f] != model.query[f]]
        if timed_out:
            sol.status = TIMEOUT
            sol.best_bound = (best_bound if best_bound is not None else 0) / COST_QUANTUM
        else:
            sol.status = OPTIMAL
            sol.best_bound = sol.objective
    else:
        sol.status = TIMEOUT if timed_out else INFEASIBLE
        sol.best_bound = (best_bound or 0) / COST_QUANTUM if timed_out else None
    return sol
