"""Best-bound branch-and-bound over binary columns with depth-first plunging."""
from __future__ import annotations

import heapq
import math
import time

import numpy as np

from .lp import LPRelaxation
from .solution import (GAP_EPS, GAP_LIMIT, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
                       relative_gap)


def _most_fractional(x: np.ndarray, binaries: np.ndarray, int_tol: float) -> int | None:
    vals = x[binaries]
    frac = np.abs(vals - np.round(vals))
    if frac.size == 0 or frac.max() <= int_tol:
        return None
    # argmax keeps the first (canonical order) index on ties
    return int(binaries[int(np.argmax(np.round(frac, 12)))])


def branch_and_bound(c, A, senses, b, lb, ub, integrality, gap_limit: float = 0.01,
                     time_limit_s: float = math.inf, node_limit: int | None = None,
                     lp_engine: str = "simplex", feas_tol: float = 1e-7,
                     int_tol: float = 1e-6, opt_tol: float = 1e-9) -> dict:
    """Solve the MILP; returns a dict with status, x, objective, bound, gap, nodes."""
    start = time.perf_counter()
    lp = LPRelaxation(c, A, senses, b, engine=lp_engine, feas_tol=feas_tol, opt_tol=opt_tol)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    binaries = np.flatnonzero(np.asarray(integrality) != 0)

    incumbent_x = None
    incumbent = math.inf
    pruned_bound = math.inf  # smallest bound among nodes dropped by the gap test
    heap: list = []
    seq = 0
    nodes = 0
    root_bound = -math.inf

    def abs_tol(inc: float) -> float:
        return max(gap_limit * max(abs(inc), GAP_EPS), 1e-9 * max(1.0, abs(inc)))

    def global_bound(current: float = math.inf) -> float:
        best = min(current, pruned_bound)
        if heap:
            best = min(best, heap[0][0])
        return min(best, incumbent)

    plunge = None  # (bound, lb, ub) of the next child to dive into
    heapq.heappush(heap, (-math.inf, 0, seq, lb.copy(), ub.copy()))
    status = None
    while True:
        if plunge is not None:
            parent_bound, nlb, nub = plunge
            plunge = None
        elif heap:
            parent_bound, _, _, nlb, nub = heapq.heappop(heap)
        else:
            break
        if incumbent_x is not None and parent_bound >= incumbent - abs_tol(incumbent):
            pruned_bound = min(pruned_bound, parent_bound)
            continue
        if time.perf_counter() - start > time_limit_s:
            seq += 1
            heapq.heappush(heap, (parent_bound, 0, seq, nlb, nub))
            status = TIME_LIMIT
            break
        if node_limit is not None and nodes >= node_limit:
            seq += 1
            heapq.heappush(heap, (parent_bound, 0, seq, nlb, nub))
            status = GAP_LIMIT
            break
        nodes += 1
        res = lp.solve(nlb, nub)
        if res.status == INFEASIBLE:
            continue
        if res.status == UNBOUNDED:
            if nodes == 1:
                return {"status": UNBOUNDED, "x": None, "objective": None, "bound": -math.inf,
                        "gap": None, "nodes": nodes, "certificate": res.certificate}
            continue
        node_bound = max(res.objective, parent_bound)
        if nodes == 1:
            root_bound = node_bound
        if incumbent_x is not None and node_bound >= incumbent - abs_tol(incumbent):
            pruned_bound = min(pruned_bound, node_bound)
            continue
        j = _most_fractional(res.x, binaries, int_tol)
        if j is None:
            incumbent = res.objective
            incumbent_x = res.x.copy()
            # the open tree may now be closable
            if relative_gap(incumbent, global_bound()) <= gap_limit:
                break
            continue
        seq += 1
        down_ub = nub.copy()
        down_ub[j] = 0.0
        up_lb = nlb.copy()
        up_lb[j] = 1.0
        dive, other = (nlb.copy(), down_ub), (up_lb, nub.copy())
        if res.x[j] >= 0.5:
            dive, other = other, dive
        # dive toward the nearer integer, queue the other child
        heapq.heappush(heap, (node_bound, 0, seq, *other))
        plunge = (node_bound, *dive)
        if incumbent_x is not None:
            gb = global_bound(node_bound)
            if relative_gap(incumbent, gb) <= gap_limit:
                pruned_bound = min(pruned_bound, node_bound)
                plunge = None
                break

    if plunge is not None:
        heapq.heappush(heap, (plunge[0], 0, seq + 1, plunge[1], plunge[2]))
    bound = global_bound()
    if incumbent_x is None:
        if status is None:
            return {"status": INFEASIBLE, "x": None, "objective": None, "bound": None,
                    "gap": None, "nodes": nodes}
        return {"status": status, "x": None, "objective": None,
                "bound": bound if math.isfinite(bound) else root_bound,
                "gap": None, "nodes": nodes}
    bound = min(bound, incumbent)
    gap = relative_gap(incumbent, bound)
    if status is None or gap <= gap_limit:
        status = OPTIMAL
    return {"status": status, "x": incumbent_x, "objective": incumbent, "bound": bound,
            "gap": gap, "nodes": nodes}
