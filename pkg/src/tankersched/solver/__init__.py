"""Solving :class:`~tankersched.milp.MilpModel` instances.

``solve_lp`` handles the continuous relaxation, ``solve_milp`` runs
branch-and-bound (or hands the model to HiGHS), ``check_solution``
re-evaluates an assignment against every row, bound and integrality mark.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import BINARY, EQ, GE, LE, MilpModel, ModelError
from .bnb import branch_and_bound
from .highs import solve_highs
from .lp import LPRelaxation
from .solution import (GAP_LIMIT, INFEASIBLE, OPTIMAL, STATUSES, TIME_LIMIT, UNBOUNDED,
                       NumericalStall, Solution, SolveConfig, load_solution, relative_gap)

__all__ = [
    "GAP_LIMIT", "INFEASIBLE", "OPTIMAL", "STATUSES", "TIME_LIMIT", "UNBOUNDED",
    "NumericalStall", "Solution", "SolveConfig", "ViolationReport", "check_solution",
    "load_solution", "solve", "solve_lp", "solve_milp",
]


def _make_solution(model: MilpModel, res: dict, cfg: dict, wall: float) -> Solution:
    x = res.get("x")
    assignment = {}
    if x is not None:
        assignment = {v.name: float(x[j]) for j, v in enumerate(model.variables)}
    obj = res.get("objective")
    if obj is not None:
        obj = obj + model.obj_constant
    bound = res.get("bound")
    if bound is not None and math.isfinite(bound):
        bound = bound + model.obj_constant
    gap = relative_gap(obj, bound) if obj is not None else None
    cert = res.get("certificate")
    return Solution(status=res["status"], assignment=assignment, objective=obj, bound=bound,
                    gap=gap, node_count=int(res.get("nodes", 0)), wall_time=wall, config=cfg,
                    certificate=None if cert is None else [float(v) for v in cert], x=x)


def solve_lp(model: MilpModel, tol: float = 1e-7, engine: str = "simplex") -> Solution:
    """Solve the continuous relaxation (binaries relaxed to [0, 1])."""
    t0 = time.perf_counter()
    c, A, senses, b, lb, ub, _ = model.arrays()
    lp = LPRelaxation(c, A, senses, b, engine=engine, feas_tol=tol)
    res = lp.solve(lb, ub)
    out = {"status": res.status, "x": res.x, "objective": res.objective,
           "bound": res.objective, "nodes": 0, "certificate": res.certificate}
    cfg = {"solver": "lp", "lp_engine": engine, "feas_tol": tol}
    return _make_solution(model, out, cfg, time.perf_counter() - t0)


def solve_milp(model: MilpModel, gap_limit: float = 0.01, time_limit_s: float = 36000.0,
               node_limit: int | None = None, config: SolveConfig | None = None) -> Solution:
    """Branch-and-bound on the binary columns of ``model``."""
    cfg = config or SolveConfig()
    cfg = SolveConfig(**{**cfg.to_dict(), "gap_limit": gap_limit,
                         "time_limit_s": time_limit_s, "node_limit": node_limit})
    return solve(model, cfg)


def solve(model: MilpModel, cfg: SolveConfig | None = None) -> Solution:
    """Dispatch ``model`` to the configured backend."""
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    c, A, senses, b, lb, ub, integ = model.arrays()
    if cfg.backend == "highs":
        res = solve_highs(c, A, senses, b, lb, ub, integ, gap_limit=cfg.gap_limit,
                          time_limit_s=cfg.time_limit_s, node_limit=cfg.node_limit,
                          feas_tol=cfg.feas_tol)
    elif cfg.backend == "bnb":
        res = branch_and_bound(c, A, senses, b, lb, ub, integ, gap_limit=cfg.gap_limit,
                               time_limit_s=cfg.time_limit_s, node_limit=cfg.node_limit,
                               lp_engine=cfg.lp_engine, feas_tol=cfg.feas_tol,
                               int_tol=cfg.int_tol, opt_tol=cfg.opt_tol)
    else:
        raise ValueError(f"unknown backend {cfg.backend!r}")
    return _make_solution(model, res, cfg.to_dict(), time.perf_counter() - t0)


@dataclass
class ViolationReport:
    rows: list[tuple[str, float]] = field(default_factory=list)
    bounds: list[tuple[str, float]] = field(default_factory=list)
    integrality: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.rows or self.bounds or self.integrality)

    def __len__(self) -> int:
        return len(self.rows) + len(self.bounds) + len(self.integrality)


def check_solution(model: MilpModel, assignment: dict[str, float], tol: float = 1e-6,
                   int_tol: float | None = None) -> ViolationReport:
    """Residuals beyond ``tol * (1 + |rhs|)`` per row, bound and integrality breaches."""
    x = model.assignment_vector(assignment)
    int_tol = tol if int_tol is None else int_tol
    rep = ViolationReport()
    _, A, senses, b, lb, ub, integ = model.arrays()
    ax = A @ x
    scale = tol * (1.0 + np.abs(b))
    for i, row in enumerate(model.rows):
        if row.sense == LE:
            r = ax[i] - b[i]
        elif row.sense == GE:
            r = b[i] - ax[i]
        elif row.sense == EQ:
            r = abs(ax[i] - b[i])
        else:  # pragma: no cover
            raise ModelError(row.sense)
        if r > scale[i]:
            rep.rows.append((row.name, float(r)))
    for j, v in enumerate(model.variables):
        lo = lb[j] - x[j]
        hi = x[j] - ub[j]
        worst = max(lo, hi)
        if worst > tol * (1.0 + max(abs(lb[j]) if math.isfinite(lb[j]) else 0.0,
                                    abs(ub[j]) if math.isfinite(ub[j]) else 0.0)):
            rep.bounds.append((v.name, float(worst)))
        if v.kind == BINARY and abs(x[j] - round(x[j])) > int_tol:
            rep.integrality.append((v.name, float(x[j])))
    return rep
