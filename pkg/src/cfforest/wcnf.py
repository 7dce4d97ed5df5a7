"""Partial weighted MaxSAT encoding of the counterfactual search problem.

Boolean variables: threshold literals ("x_f lies left of tau"), one-hot
category literals, per-leaf literals and pseudo-Boolean auxiliaries.  Hard
clauses cover feature-domain consistency, threshold ordering, exactly-one
leaf per tree, path consistency and the target-class condition (a cardinality
constraint under hard voting, a scaled pseudo-Boolean inequality under soft
voting).  Soft clauses encode the incremental weighted L1 displacement: the
total violated weight of any assignment equals the quantized L1 cost of the
decoded point.

Solving is out of scope: the instance serializes to DIMACS WCNF for any
external MaxSAT solver, and an exhaustive minimizer is provided for tests.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import ensemble as ec
from . import features as fs
from .cpmodel import GROUP, SCORE_SCALE, build_model
from .errors import InputError, SchemaError

WEIGHT_QUANTUM = 10 ** 6
TRUE = "T"
FALSE = "F"


@dataclass
class SoftClause:
    lits: tuple
    weight: int


@dataclass
class WcnfInstance:
    n_vars: int = 0
    hard: list = field(default_factory=list)     # tuples of signed literals
    soft: list = field(default_factory=list)     # SoftClause
    meaning: dict = field(default_factory=dict)  # var id -> description
    aux_defs: dict = field(default_factory=dict)  # var id -> (terms, i, rhs)
    model: object = None                          # underlying CfModel
    thr_ids: dict = field(default_factory=dict)   # var index -> [t ids]
    binary_ids: dict = field(default_factory=dict)  # var index -> nu id
    member_ids: dict = field(default_factory=dict)  # var index -> [nu ids]
    leaf_ids: np.ndarray = None                   # per main-block row
    weight_quantum: int = WEIGHT_QUANTUM

    @property
    def top(self):
        return 1 + sum(c.weight for c in self.soft)

    def new_var(self, meaning):
        self.n_vars += 1
        self.meaning[self.n_vars] = meaning
        return self.n_vars

    def decision_vars(self):
        out = []
        for ids in self.thr_ids.values():
            out.extend(ids)
        out.extend(self.binary_ids.values())
        for ids in self.member_ids.values():
            out.extend(ids)
        out.extend(int(v) for v in self.leaf_ids)
        return sorted(out)

    def to_dimacs(self):
        top = self.top
        if top > 2 ** 63 - 1:
            raise InputError("top weight overflows 63-bit integer")
        lines = ["c cfforest wcnf encoding"]
        for vid in sorted(self.meaning):
            lines.append("c var %d %s" % (vid, self.meaning[vid]))
        lines.append("p wcnf %d %d %d"
                     % (self.n_vars, len(self.hard) + len(self.soft), top))
        for cl in self.hard:
            lines.append("%d %s 0" % (top, " ".join(str(l) for l in cl)))
        for sc in self.soft:
            lines.append("%d %s 0" % (sc.weight, " ".join(str(l) for l in sc.lits)))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Pseudo-Boolean >= compiler (BDD over remaining slack, Tseitin implications)


def encode_pb_geq(terms, rhs, inst=None, label="pb"):
    """CNF clauses equivalent (over the term literals) to
    sum(coeff * lit) >= rhs.  Negative coefficients are normalized by
    flipping the literal.  Returns the clause list; auxiliaries are
    allocated in inst when given (a throwaway instance otherwise)."""
    if inst is None:
        inst = WcnfInstance()
        inst.n_vars = max((abs(l) for l, _ in terms), default=0)
    norm = []
    for lit, c in terms:
        if c == 0:
            continue
        if c < 0:
            lit, c = -lit, -c
            rhs += c
        norm.append((lit, c))
    norm.sort(key=lambda t: (-t[1], abs(t[0])))
    suffix = [0] * (len(norm) + 1)
    for i in range(len(norm) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + norm[i][1]
    if rhs <= 0:
        return []
    if suffix[0] < rhs:
        return [()]

    clauses = []
    memo = {}

    def node(i, r):
        if r <= 0:
            return TRUE
        if suffix[i] < r:
            return FALSE
        key = (i, r)
        if key in memo:
            return memo[key]
        lit, c = norm[i]
        hi = node(i + 1, r - c)
        lo = node(i + 1, r)
        a = inst.new_var("%s slack>=%d from term %d" % (label, r, i))
        inst.aux_defs[a] = (tuple(norm), i, r)
        if hi is FALSE:
            clauses.append((-a, -lit))
        elif hi is not TRUE:
            clauses.append((-a, -lit, hi))
        if lo is FALSE:
            clauses.append((-a, lit))
        elif lo is not TRUE:
            clauses.append((-a, lit, lo))
        memo[key] = a
        return a

    root = node(0, rhs)
    if root is TRUE:
        return []
    if root is FALSE:
        return [()]
    clauses.append((root,))
    return clauses


def _aux_value(inst, aux, values):
    terms, i, r = inst.aux_defs[aux]
    total = 0
    for lit, c in terms[i:]:
        v = values.get(abs(lit))
        lit_true = v if lit > 0 else (not v)
        if lit_true:
            total += c
    return total >= r


def extend_with_aux(inst, values):
    """Complete a decision-variable valuation with the semantic values of
    every pseudo-Boolean auxiliary."""
    out = dict(values)
    for aux in inst.aux_defs:
        out[aux] = _aux_value(inst, aux, values)
    return out


# ---------------------------------------------------------------------------
# Encoder


def _exactly_one(inst, ids):
    inst.hard.append(tuple(ids))
    for a, b in itertools.combinations(ids, 2):
        inst.hard.append((-a, -b))


def _ordinal_wing_thresholds(part, grid, semantics):
    """Threshold values adjusted to the nearest admissible ordinal value on
    the side a violated soft clause would land on."""
    down, up = [], []
    for tau in part.thresholds:
        if semantics == fs.LEFT_CLOSED:
            below = [g for g in grid if g <= tau]
            above = [g for g in grid if g > tau]
        else:
            below = [g for g in grid if g < tau]
            above = [g for g in grid if g >= tau]
        down.append(max(below) if below else part.lb)
        up.append(min(above) if above else part.ub)
    return down, up


def encode_wcnf(ens, query, target, *, eps_c=1e-7, weight_quantum=WEIGHT_QUANTUM,
                allow_identity=False):
    """Compile (ensemble, query, target) to a WcnfInstance whose minimum-
    weight model is the optimal L1 counterfactual at quantized weights."""
    model = build_model(ens, query, target, norm=1, eps_c=eps_c,
                        allow_identity=allow_identity)
    inst = WcnfInstance(model=model, weight_quantum=weight_quantum)
    space = ens.feature_space
    semantics = ens.split_semantics

    # variables
    for vi, var in enumerate(model.vars):
        if var.kind == GROUP:
            ids = [inst.new_var("member %s" % space[f].name) for f in var.members]
            inst.member_ids[vi] = ids
            _exactly_one(inst, ids)
        elif var.partition is not None:
            ids = [inst.new_var("thr %s<=%r" % (var.name, tau))
                   for tau in var.partition.thresholds]
            inst.thr_ids[vi] = ids
            for a, b in zip(ids, ids[1:]):    # crossing all smaller thresholds
                inst.hard.append((-a, b))
        else:
            inst.binary_ids[vi] = inst.new_var("bin %s=1" % var.name)

    main = model.main
    leaf_ids = [inst.new_var("leaf t%d l%d" % (t, l))
                for t, l in zip(main.tree_id, main.leaf_id)]
    inst.leaf_ids = np.asarray(leaf_ids, dtype=np.int64)
    for t in range(main.n_trees):
        end = main.seg[t + 1] if t + 1 < main.n_trees else main.n
        _exactly_one(inst, leaf_ids[main.seg[t]:end])

    # path clauses from the leaf boxes
    for row in range(main.n):
        z = leaf_ids[row]
        for vi, ids in inst.thr_ids.items():
            col = model.ivar_pos[vi]
            k = model.vars[vi].partition.k
            mlo, mhi = int(main.lo[row, col]), int(main.hi[row, col])
            if mlo > mhi:
                inst.hard.append((-z,))
                continue
            if mhi < k:
                inst.hard.append((-z, ids[mhi]))        # x_f <= tau_{mhi+1}
            if mlo > 0:
                inst.hard.append((-z, -ids[mlo - 1]))   # x_f > tau_{mlo}
        for vi, nid in inst.binary_ids.items():
            col = model.ivar_pos[vi]
            mlo, mhi = int(main.lo[row, col]), int(main.hi[row, col])
            if mlo > mhi:
                inst.hard.append((-z,))
            elif (mlo, mhi) == (1, 1):
                inst.hard.append((-z, nid))
            elif (mlo, mhi) == (0, 0):
                inst.hard.append((-z, -nid))
        for vi, ids in inst.member_ids.items():
            col = model.gvar_pos[vi]
            mask = int(main.mask[row, col])
            full = (1 << len(ids)) - 1
            if mask == 0:
                inst.hard.append((-z,))
                continue
            if mask.bit_count() == 1:
                inst.hard.append((-z, ids[mask.bit_length() - 1]))
            else:
                for pos in range(len(ids)):
                    if full >> pos & 1 and not mask >> pos & 1:
                        inst.hard.append((-z, -ids[pos]))

    # target-class condition
    if ens.voting == ec.HARD:
        for ri, y in enumerate(model.rivals):
            terms = []
            for row in range(main.n):
                scores = ens.trees[main.tree_id[row]].leaves[main.leaf_id[row]].scores
                label = int(np.argmax(scores))
                if label == target:
                    terms.append((leaf_ids[row], 1))
                elif label == y:
                    terms.append((leaf_ids[row], -1))
            inst.hard.extend(encode_pb_geq(terms, 1, inst, "card y%d" % y))
    else:
        rhs_base = max(1, int(round(SCORE_SCALE * eps_c)))
        for ri, y in enumerate(model.rivals):
            terms = [(leaf_ids[row], int(model.d_diff[ri, row]))
                     for row in range(main.n) if model.d_diff[ri, row] != 0]
            rhs = rhs_base - int(model.b_diff[ri])
            inst.hard.extend(encode_pb_geq(terms, rhs, inst, "pb y%d" % y))

    # L1 soft clauses
    for vi, var in enumerate(model.vars):
        alpha = space[var.feature].effective_alpha() if var.kind != GROUP \
            else space[var.members[0]].effective_alpha()
        if var.kind == GROUP:
            w = int(round(weight_quantum * alpha))
            if w > 0:
                inst.soft.append(SoftClause(
                    (inst.member_ids[vi][var.query_value],), w))
        elif var.partition is None:
            w = int(round(weight_quantum * alpha))
            if w > 0:
                nid = inst.binary_ids[vi]
                inst.soft.append(SoftClause(
                    (nid if var.query_value == 1 else -nid,), w))
        else:
            part = var.partition
            if part.k == 0:
                continue
            ids = inst.thr_ids[vi]
            xhat = float(model.query[var.feature])
            j = var.query_value            # interval index, 0-based
            if var.grid:
                down, up = _ordinal_wing_thresholds(part, var.grid, semantics)
            else:
                down = up = list(part.thresholds)

            def emit(lit, displacement):
                w = int(round(weight_quantum * alpha * displacement))
                if w > 0:
                    inst.soft.append(SoftClause((lit,), w))

            for k in range(1, j):          # 1-based thresholds below the query
                emit(-ids[k - 1], down[k] - down[k - 1])
            if j >= 1:
                emit(-ids[j - 1], xhat - down[j - 1])
            if j + 1 <= part.k:
                emit(ids[j], up[j] - xhat)
            for k in range(j + 2, part.k + 1):
                emit(ids[k - 1], up[k - 1] - up[k - 2])

    if not inst.soft:
        raise InputError("degenerate objective: every soft weight is zero")
    if inst.top > 2 ** 63 - 1:
        raise InputError("top weight overflows 63-bit integer")
    return inst


# ---------------------------------------------------------------------------
# Decoding and exhaustive checking


def _check_hard(inst, values):
    for cl in inst.hard:
        if not cl:
            return False
        if not any(values[abs(l)] if l > 0 else not values[abs(l)] for l in cl):
            return False
    return True


def soft_violation_weight(inst, values):
    total = 0
    for sc in inst.soft:
        sat = any(values[abs(l)] if l > 0 else not values[abs(l)]
                  for l in sc.lits)
        if not sat:
            total += sc.weight
    return total


def decode_model(inst, assignment):
    """Counterfactual point and objective from a satisfying valuation.

    assignment maps variable id -> bool for at least the decision variables;
    auxiliaries are completed semantically.
    """
    model = inst.model
    values = extend_with_aux(inst, assignment)
    if not _check_hard(inst, values):
        raise SchemaError("assignment violates a hard clause")
    cell = [0] * len(model.vars)
    for vi, var in enumerate(model.vars):
        if var.kind == GROUP:
            chosen = [pos for pos, nid in enumerate(inst.member_ids[vi])
                      if values[nid]]
            cell[vi] = chosen[0]
        elif var.partition is None:
            cell[vi] = 1 if values[inst.binary_ids[vi]] else 0
        else:
            ids = inst.thr_ids[vi]
            states = [values[i] for i in ids]
            if any(a and not b for a, b in zip(states, states[1:])):
                raise SchemaError("threshold literals non-monotone")
            cell[vi] = next((i for i, s in enumerate(states) if s), len(ids))
    point = model.realize_point(cell)
    s, label = ec.predict_scores(model.ens, point)
    valid = all(s[model.target] - s[y] >= model.eps_c for y in model.rivals)
    names = model.ens.feature_space.names()
    return {
        "point": {names[f]: float(point[f]) for f in range(len(names))},
        "objective": soft_violation_weight(inst, values) / inst.weight_quantum,
        "valid": bool(valid),
        "cell": cell,
    }


def exhaustive_min(inst):
    """Minimum-weight hard-feasible assignment by structured enumeration of
    the finite cell grid (all other valuations violate a domain, ordering,
    leaf or path hard clause).  Test-scale only."""
    model = inst.model
    main = model.main
    domains = []
    for vi, var in enumerate(model.vars):
        domains.append(list(range(var.n_values)))
    best = None
    for cell in itertools.product(*domains):
        values = {}
        for vi, var in enumerate(model.vars):
            if var.kind == GROUP:
                for pos, nid in enumerate(inst.member_ids[vi]):
                    values[nid] = pos == cell[vi]
            elif var.partition is None:
                values[inst.binary_ids[vi]] = cell[vi] == 1
            else:
                for i, nid in enumerate(inst.thr_ids[vi]):
                    values[nid] = cell[vi] <= i
        for row in range(main.n):
            ok = True
            for vi in inst.thr_ids:
                col = model.ivar_pos[vi]
                if not (main.lo[row, col] <= cell[vi] <= main.hi[row, col]):
                    ok = False
                    break
            if ok:
                for vi in inst.binary_ids:
                    col = model.ivar_pos[vi]
                    if not (main.lo[row, col] <= cell[vi] <= main.hi[row, col]):
                        ok = False
                        break
            if ok:
                for vi in inst.member_ids:
                    col = model.gvar_pos[vi]
                    if not (int(main.mask[row, col]) >> cell[vi]) & 1:
                        ok = False
                        break
            values[int(inst.leaf_ids[row])] = ok
        full = extend_with_aux(inst, values)
        if not _check_hard(inst, full):
            continue
        w = soft_violation_weight(inst, full)
        if best is None or w < best[1]:
            best = (dict(values), w)
    return best


def parse_vline(text):
    """Valuation from a MaxSAT solver's "v " line(s): signed literal list."""
    values = {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("v"):
            continue
        body = line[1:].strip()
        if set(body) <= {"0", "1"}:       # new-format bit string
            for i, ch in enumerate(body, start=1):
                values[i] = ch == "1"
            continue
        for tok in body.split():
            lit = int(tok)
            if lit != 0:
                values[abs(lit)] = lit > 0
    if not values:
        raise InputError("no v-line found in solver output")
    return values
