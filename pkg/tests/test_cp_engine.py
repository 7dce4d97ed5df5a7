import numpy as np
import pytest

import cfforest as cf
from cfforest import solver
from cfforest.cpmodel import COST_QUANTUM, build_model
from cfforest.errors import InputError
from cfforest.solver import (CONFLICT, INFEASIBLE, OPTIMAL, TIMEOUT,
                             lower_bound, propagate)


def test_toy_a_model_shape(toy_a):
    m = build_model(toy_a, [1.0], 1)
    assert len(m.vars) == 1
    var = m.vars[0]
    assert (var.init_lo, var.init_hi) == (0, 1)
    assert m.main.n == 2
    assert len(m.rivals) == 1
    assert m.e_c == 100  # 1e-7 at the 1e9 score scale


def test_toy_b_score_coefficients(toy_b):
    m = build_model(toy_b, [1.0], 1)
    # leaf [0.4, 0.6] with w=0.5: s1 - s0 = 0.5*(0.6-0.4) = 0.1 -> 1e8
    assert 100000000 in m.d_diff[0]
    # leaf [0.8, 0.2] with w=0.5: -0.3 -> -3e8
    assert -300000000 in m.d_diff[0]


def test_propagation_forces_toy_a_domain(toy_a):
    m = build_model(toy_a, [1.0], 1)
    root = solver._root_state(m)
    assert propagate(m, root) is not CONFLICT
    # the class constraint kills the left leaf, forcing interval 1
    assert (root.lo[0], root.hi[0]) == (1, 1)
    # bound is the quantized cost of interval 1: alpha * (3.0 - 1.0)
    assert lower_bound(m, root) == 2 * COST_QUANTUM


def test_propagation_conflict_on_fixed_interval(toy_b):
    m = build_model(toy_b, [1.0], 1)
    root = solver._root_state(m)
    root.lo[0] = root.hi[0] = 0
    assert propagate(m, root) is CONFLICT


def test_root_propagation_keeps_feasible_interval(toy_b):
    # the root-level score bound already isolates the single interval able
    # to reach the target margin; the bound is its quantized cost
    m = build_model(toy_b, [1.0], 1)
    root = solver._root_state(m)
    assert propagate(m, root) is not CONFLICT
    assert root.lo[0] <= 2 <= root.hi[0]
    assert lower_bound(m, root) <= 5 * COST_QUANTUM


def test_solve_toy_a(toy_a):
    m = build_model(toy_a, [1.0], 1)
    sol = cf.solve(m)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(2.0)
    assert sol.best_bound == pytest.approx(2.0)
    assert sol.point["f0"] == pytest.approx(3.0, abs=1e-4)
    assert sol.point["f0"] > 3.0
    assert sol.changed_features == ["f0"]


def test_solve_toy_b(toy_b):
    sol = cf.solve(build_model(toy_b, [1.0], 1))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(5.0)
    assert sol.point["f0"] > 6.0


def test_immutable_feature_infeasible(toy_a):
    m = build_model(toy_a, [1.0], 1, actionability={"f0": "immutable"})
    sol = cf.solve(m)
    assert sol.status == INFEASIBLE
    assert sol.point is None


def test_actionability_monotone(toy_b):
    # query 8.0 is class 1; moving to class 0 requires decreasing f0,
    # which increase_only forbids
    m = build_model(toy_b, [8.0], 0, actionability={"f0": "increase_only"})
    assert cf.solve(m).status == INFEASIBLE
    m = build_model(toy_b, [8.0], 0, actionability={"f0": "decrease_only"})
    sol = cf.solve(m)
    assert sol.status == OPTIMAL
    assert sol.point["f0"] <= 6.0


def test_query_already_target_rejected(toy_a):
    with pytest.raises(InputError, match="already classified"):
        build_model(toy_a, [1.0], 0)


def test_bad_target_rejected(toy_a):
    with pytest.raises(InputError):
        build_model(toy_a, [1.0], 7)


def test_deterministic_resolve(toy_b):
    a = cf.solve(build_model(toy_b, [1.0], 1))
    b = cf.solve(build_model(toy_b, [1.0], 1))
    assert a.objective == b.objective
    assert a.point == b.point
    assert a.nodes == b.nodes


def test_zero_budget_times_out(toy_b):
    sol = cf.solve(build_model(toy_b, [1.0], 1), budget=0.0)
    assert sol.status in (TIMEOUT, INFEASIBLE)
    assert sol.status == TIMEOUT


def test_trace_monotone(toy_b):
    sol = cf.solve(build_model(toy_b, [1.0], 1))
    costs = [c for _, c in sol.trace]
    assert costs == sorted(costs, reverse=True)
    assert all(b1 <= b2 for (_, b1), (_, b2)
               in zip(sol.bound_trace, sol.bound_trace[1:]))


def test_to_doc_shape(toy_a):
    doc = cf.solve(build_model(toy_a, [1.0], 1)).to_doc()
    for key in ("status", "objective", "bound", "point", "trace",
                "build_time_s", "solve_time_s", "changed_features"):
        assert key in doc
