import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from milpgen import enumerate_optimum, random_milp
from tankersched.milp import BINARY, MilpModel
from tankersched.solver import (GAP_LIMIT, INFEASIBLE, OPTIMAL, UNBOUNDED, SolveConfig,
                                check_solution, solve, solve_lp, solve_milp)
from tankersched.solver.simplex import simplex


def _lp_case(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 8)), int(rng.integers(1, 8))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 3, n)
    senses = rng.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2])
    b = A @ x0 + np.where(senses == "<=", 1.0, np.where(senses == ">=", -1.0, 0.0))
    c = rng.integers(-5, 6, size=n).astype(float)
    lb = np.where(rng.random(n) < 0.2, -np.inf, 0.0)
    ub = np.where(rng.random(n) < 0.5, rng.uniform(3, 6, n), np.inf)
    return c, A, list(senses), b, lb, ub


def _linprog(c, A, senses, b, lb, ub):
    s = np.array(senses)
    A_ub = np.vstack([A[s == "<="], -A[s == ">="]])
    b_ub = np.concatenate([b[s == "<="], -b[s == ">="]])
    return linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                   A_eq=A[s == "="] if (s == "=").any() else None,
                   b_eq=b[s == "="] if (s == "=").any() else None,
                   bounds=[(None if l == -np.inf else l, None if u == np.inf else u)
                           for l, u in zip(lb, ub)], method="highs")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_simplex_matches_highs(seed):
    # every case is feasible by construction; boxing the free directions
    # separates "optimal" from "unbounded" without trusting presolve statuses
    c, A, senses, b, lb, ub = _lp_case(seed)
    ref = _linprog(c, A, senses, b, np.maximum(lb, -1e6), np.minimum(ub, 1e6))
    assert ref.status == 0
    res = simplex(c, A, senses, b, lb, ub)
    if ref.fun < -1e4:
        assert res.status == UNBOUNDED
    else:
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


def test_infeasible_lp_certificate():
    # x + y <= 1 and x + y >= 3 over x, y >= 0
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    res = simplex(np.zeros(2), A, ["<=", ">="], np.array([1.0, 3.0]), np.zeros(2),
                  np.full(2, np.inf))
    assert res.status == INFEASIBLE
    y = res.certificate
    assert y is not None and len(y) == 2
    # a valid Farkas multiplier combines the rows into 0 x (sense) nonzero rhs
    assert np.allclose(y @ A, 0.0, atol=1e-9)
    assert abs(y @ np.array([1.0, 3.0])) > 1e-9


def test_unbounded_lp():
    res = simplex(np.array([-1.0, 0.0]), np.array([[0.0, 1.0]]), ["<="], np.array([1.0]),
                  np.zeros(2), np.full(2, np.inf))
    assert res.status == UNBOUNDED


def _knapsack(values, weights, cap):
    m = MilpModel("knap")
    cols = [m.add_var(f"y{j}", BINARY) for j in range(len(values))]
    for j, v in zip(cols, values):
        m.set_cost(j, -v)
    m.add_row("cap", "cap", list(zip(cols, weights)), "<=", cap)
    return m


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 30), st.integers(1, 20)), min_size=1, max_size=10),
       st.integers(0, 60))
def test_bnb_knapsack_matches_brute_force(items, cap):
    values, weights = zip(*items)
    best = max(sum(v for v, t in zip(values, pick) if t)
               for pick in itertools.product((0, 1), repeat=len(items))
               if sum(w for w, t in zip(weights, pick) if t) <= cap)
    sol = solve_milp(_knapsack(values, weights, cap), gap_limit=0.0)
    assert sol.status == OPTIMAL
    assert -sol.objective == pytest.approx(best)


@pytest.mark.parametrize("seed", range(8))
def test_bnb_matches_live_enumeration(seed):
    model = random_milp(1000 + seed)
    ref = enumerate_optimum(model)
    sol = solve_milp(model, gap_limit=0.0)
    if ref is None:
        assert sol.status == INFEASIBLE
    else:
        assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-6)
        assert check_solution(model, sol.assignment).ok


@pytest.mark.parametrize("engine", ["simplex", "highs"])
def test_lp_engines_agree(engine, tiny, tiny_k2):
    from tankersched.formulation import build_tsr
    model = build_tsr(tiny, tiny_k2)
    ref = solve_lp(model, engine="highs")
    assert solve_lp(model, engine=engine).objective == pytest.approx(ref.objective, rel=1e-7)


def test_bnb_and_highs_agree_on_tiny_tsr(tiny, tiny_k2):
    from tankersched.formulation import build_tsr
    model = build_tsr(tiny, tiny_k2)
    a = solve(model, SolveConfig(backend="bnb", gap_limit=0.0))
    b = solve(model, SolveConfig(backend="highs", gap_limit=0.0))
    assert a.status == b.status == OPTIMAL
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_node_limit_reports_honest_gap():
    rng = np.random.default_rng(3)
    values, weights = rng.integers(10, 40, 18), rng.integers(5, 25, 18)
    sol = solve_milp(_knapsack(values, weights, 90), gap_limit=0.0, node_limit=3)
    assert sol.status in (GAP_LIMIT, OPTIMAL)
    if sol.status == GAP_LIMIT and sol.has_incumbent:
        assert sol.gap > 0.0 and sol.bound <= sol.objective
    elif sol.status == GAP_LIMIT:
        # limit hit before any incumbent: bound only
        assert sol.assignment == {} and sol.objective is None and sol.bound is not None


@pytest.mark.parametrize("limit", [1, 2, 5])
def test_limits_stop_right_after_branching(limit):
    # the node handed back to the queue ties its sibling on bound
    rng = np.random.default_rng(3)
    model = _knapsack(rng.integers(10, 40, 18), rng.integers(5, 25, 18), 90)
    sol = solve_milp(model, gap_limit=0.0, node_limit=limit)
    assert sol.status in (GAP_LIMIT, OPTIMAL)
    assert sol.bound is not None
    sol = solve(model, SolveConfig(gap_limit=0.0, time_limit_s=0.0))
    assert sol.bound is not None


def test_loose_gap_returns_first_incumbent():
    rng = np.random.default_rng(5)
    model = _knapsack(rng.integers(10, 40, 14), rng.integers(5, 25, 14), 70)
    sol = solve_milp(model, gap_limit=1.0)
    assert sol.status == OPTIMAL and sol.has_incumbent
    assert check_solution(model, sol.assignment).ok


def test_tiny_tsr_bnb_tight_gap_is_fast(tiny, tiny_k2):
    import time
    from tankersched.formulation import build_tsr
    t0 = time.perf_counter()
    sol = solve_milp(build_tsr(tiny, tiny_k2), gap_limit=1e-6)
    assert sol.status == OPTIMAL and sol.gap <= 1e-6
    assert time.perf_counter() - t0 < 10.0


def test_reported_gap_is_consistent():
    sol = solve_milp(random_milp(7), gap_limit=0.05)
    if sol.has_incumbent:
        assert sol.bound <= sol.objective + 1e-9
        assert sol.gap == pytest.approx((sol.objective - sol.bound) / max(abs(sol.objective), 1e-9))
