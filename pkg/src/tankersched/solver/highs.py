"""HiGHS backend (via SciPy) behind the same model -> solution contract."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .solution import (GAP_LIMIT, INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
                       relative_gap)


def solve_highs(c, A, senses, b, lb, ub, integrality, gap_limit: float = 0.01,
                time_limit_s: float = math.inf, node_limit: int | None = None,
                feas_tol: float = 1e-7) -> dict:
    senses = np.asarray(senses, dtype=object)
    lo = np.where(senses == "<=", -np.inf, b)
    hi = np.where(senses == ">=", np.inf, b)
    # scipy's milp wrapper exposes no feasibility tolerance; HiGHS defaults apply
    options = {"disp": False, "presolve": True, "mip_rel_gap": max(gap_limit, 0.0)}
    if math.isfinite(time_limit_s):
        options["time_limit"] = float(time_limit_s)
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    constraints = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    res = milp(np.asarray(c, dtype=float), constraints=constraints,
               integrality=np.asarray(integrality), bounds=Bounds(lb, ub), options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return {"status": INFEASIBLE, "x": None, "objective": None, "bound": None, "gap": None,
                "nodes": nodes}
    if res.status == 3:
        return {"status": UNBOUNDED, "x": None, "objective": None, "bound": -math.inf,
                "gap": None, "nodes": nodes}
    bound = getattr(res, "mip_dual_bound", None)
    if res.x is None:
        status = TIME_LIMIT if res.status == 1 else INFEASIBLE
        return {"status": status, "x": None, "objective": None, "bound": bound, "gap": None,
                "nodes": nodes}
    x = np.asarray(res.x, dtype=float)
    obj = float(np.dot(c, x))
    if bound is None or not np.any(integrality):
        bound = obj
    bound = min(float(bound), obj)
    gap = relative_gap(obj, bound)
    if res.status == 0 or gap <= gap_limit:
        status = OPTIMAL
    else:
        status = TIME_LIMIT if "time" in str(res.message).lower() else GAP_LIMIT
    return {"status": status, "x": x, "objective": obj, "bound": bound, "gap": gap,
            "nodes": nodes}
