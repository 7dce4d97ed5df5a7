"""Feature metadata, threshold partitions, actionability and displacement costs.

Numerical and ordinal features are discretized into the intervals induced by
the split thresholds appearing in the ensemble.  The discretization is exact:
two values in the same interval route identically through every tree, so the
search only ever needs to pick an interval index per feature.
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .errors import InfeasibleIntervalError, SchemaError

NUMERICAL = "numerical"
ORDINAL = "ordinal"
BINARY = "binary"
CATEGORICAL = "categorical"

KINDS = (NUMERICAL, ORDINAL, BINARY, CATEGORICAL)
ACTIONABILITIES = ("free", "immutable", "increase_only", "decrease_only")

LEFT_CLOSED = "left_closed"   # split condition x <= tau goes left
RIGHT_OPEN = "right_open"     # split condition x < tau goes left (XGBoost style)
SEMANTICS = (LEFT_CLOSED, RIGHT_OPEN)


@dataclass
class FeatureSpec:
    name: str
    kind: str = NUMERICAL
    lb: float = 0.0
    ub: float = 1.0
    group: str | None = None          # one-hot group id for categorical members
    ordinal_grid: list | None = None  # sorted admissible values
    actionability: str = "free"
    alpha: float | None = None        # cost weight; None picks the default

    def validate(self):
        if self.kind not in KINDS:
            raise SchemaError("feature %r: unknown kind %r" % (self.name, self.kind))
        if self.actionability not in ACTIONABILITIES:
            raise SchemaError("feature %r: unknown actionability %r"
                              % (self.name, self.actionability))
        if not (self.lb <= self.ub):
            raise SchemaError("feature %r: lb > ub" % self.name)
        if self.kind in (BINARY, CATEGORICAL) and (self.lb, self.ub) != (0.0, 1.0):
            raise SchemaError("feature %r: binary/categorical bounds must be {0,1}"
                              % self.name)
        if self.kind == CATEGORICAL and self.group is None:
            raise SchemaError("feature %r: categorical member without a group"
                              % self.name)
        if self.kind != CATEGORICAL and self.group is not None:
            raise SchemaError("feature %r: group on non-categorical feature"
                              % self.name)
        if self.ordinal_grid is not None:
            grid = list(self.ordinal_grid)
            if grid != sorted(grid):
                raise SchemaError("feature %r: ordinal grid not sorted" % self.name)
            if grid and (grid[0] < self.lb or grid[-1] > self.ub):
                raise SchemaError("feature %r: ordinal grid outside bounds" % self.name)
        if self.alpha is not None and not (self.alpha >= 0.0):
            raise SchemaError("feature %r: negative alpha" % self.name)

    def effective_alpha(self):
        """Default cost weight: min-max normalized displacement for numerical
        and ordinal features, unit cost for binary/categorical."""
        if self.alpha is not None:
            return float(self.alpha)
        if self.kind in (NUMERICAL, ORDINAL) and self.ub > self.lb:
            return 1.0 / (self.ub - self.lb)
        return 1.0


class FeatureSpace:
    """Ordered collection of feature specs with one-hot group bookkeeping."""

    def __init__(self, specs):
        self.specs = list(specs)
        self.index = {}
        self.groups = {}
        for i, spec in enumerate(self.specs):
            spec.validate()
            if spec.name in self.index:
                raise SchemaError("duplicate feature name %r" % spec.name)
            self.index[spec.name] = i
            if spec.kind == CATEGORICAL:
                self.groups.setdefault(spec.group, []).append(i)

    def __len__(self):
        return len(self.specs)

    def __getitem__(self, i):
        return self.specs[i]

    def names(self):
        return [s.name for s in self.specs]


@dataclass
class FeaturePartition:
    """Sorted split thresholds of one feature plus bracketing bounds.

    boundaries = (lb, tau_1, ..., tau_k, ub); interval m covers
    (boundaries[m], boundaries[m+1]] under left_closed semantics and
    [boundaries[m], boundaries[m+1]) under right_open semantics.
    """
    thresholds: list = field(default_factory=list)
    lb: float = 0.0
    ub: float = 1.0

    def __post_init__(self):
        bounds = [self.lb] + list(self.thresholds) + [self.ub]
        if any(a >= b for a, b in zip(bounds, bounds[1:])):
            raise SchemaError("partition boundaries not strictly increasing")
        self.boundaries = bounds
        self.k = len(self.thresholds)
        self.threshold_index = {t: i for i, t in enumerate(self.thresholds)}

    @property
    def n_intervals(self):
        return self.k + 1


def build_partition(ens, f, extra_trees=()):
    """Partition of feature f from every split threshold in the ensemble
    (plus, optionally, the trees of an attached isolation forest).

    Thresholds equal to or outside the feature bounds are dropped; a feature
    never split on yields a single-interval partition.
    """
    spec = ens.feature_space[f]
    taus = set()
    for tree in list(ens.trees) + list(extra_trees):
        for node in tree.nodes:
            if node.f == f and spec.lb < node.tau < spec.ub:
                taus.add(float(node.tau))
    return FeaturePartition(sorted(taus), spec.lb, spec.ub)


def interval_of(part, v, semantics):
    """Interval index containing v, consistent with tree routing."""
    if not (part.lb <= v <= part.ub):
        raise ValueError("value %r outside bounds [%r, %r]" % (v, part.lb, part.ub))
    if semantics == LEFT_CLOSED:
        return bisect_left(part.thresholds, v)
    return bisect_right(part.thresholds, v)


def displacement_cost(part, xhat, m, p, alpha):
    """Cost of moving xhat into interval m: alpha times the minimum
    displacement raised to the norm exponent p (p=0 charges a flat unit)."""
    lo = part.boundaries[m]
    hi = part.boundaries[m + 1]
    if xhat < lo:
        d = lo - xhat
    elif xhat >= hi and m < part.k:
        d = xhat - hi
    else:
        return 0.0
    if p == 0:
        return alpha
    return alpha * d ** p


def cost_table(part, xhat, p, alpha, semantics, quantum):
    """Integer cost per interval index, shared by the solver and the oracle.

    The query's own interval costs exactly 0; under the L0 norm every other
    interval costs a flat alpha.
    """
    m_query = interval_of(part, xhat, semantics)
    table = []
    for m in range(part.n_intervals):
        if m == m_query:
            table.append(0)
        elif p == 0:
            table.append(int(round(quantum * alpha)))
        else:
            table.append(int(round(quantum * displacement_cost(part, xhat, m, p, alpha))))
    return table


def _interval_sides(part, m, semantics):
    """(lo, lo_closed, hi, hi_closed) for interval m."""
    lo = part.boundaries[m]
    hi = part.boundaries[m + 1]
    if semantics == LEFT_CLOSED:
        return lo, m == 0, hi, True
    return lo, True, hi, m == part.k


def grid_values_in(part, m, grid, semantics):
    """Admissible ordinal grid values inside interval m."""
    lo, lo_closed, hi, hi_closed = _interval_sides(part, m, semantics)
    out = []
    for g in grid:
        if (g > lo or (lo_closed and g == lo)) and (g < hi or (hi_closed and g == hi)):
            out.append(g)
    return out


def realize_value(part, xhat, m, semantics, ordinal_grid=None):
    """Concrete value inside interval m closest to xhat.

    Open endpoints are nudged inward by eps_rep so that the realized value
    re-routes to the interval the solver selected.
    """
    lo, lo_closed, hi, hi_closed = _interval_sides(part, m, semantics)
    if ordinal_grid is not None:
        cands = grid_values_in(part, m, ordinal_grid, semantics)
        if not cands:
            raise InfeasibleIntervalError(
                "interval %d of [%r, %r] contains no admissible ordinal value"
                % (m, part.lb, part.ub))
        return min(cands, key=lambda g: (abs(g - xhat), g))
    eps = min(1e-6 * (part.ub - part.lb), (hi - lo) / 2.0)
    in_lo = (xhat > lo) or (lo_closed and xhat == lo)
    in_hi = (xhat < hi) or (hi_closed and xhat == hi)
    if in_lo and in_hi:
        return xhat
    if not in_lo:
        return lo if lo_closed else lo + eps
    return hi if hi_closed else hi - eps
