from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .simplex import LPResult, simplex
from .solution import INFEASIBLE, OPTIMAL, UNBOUNDED, NumericalStall


def _singleton_bounds(A: sp.csr_matrix, senses, b, n: int):
    """Turn one-entry rows into column bounds. Returns (keep_rows, lb_add, ub_add)."""
    lb_add = np.full(n, -np.inf)
    ub_add = np.full(n, np.inf)
    keep = []
    counts = np.diff(A.indptr)
    for i in range(A.shape[0]):
        if counts[i] != 1:
            keep.append(i)
            continue
        j = A.indices[A.indptr[i]]
        a = A.data[A.indptr[i]]
        val = b[i] / a
        sense = senses[i]
        if a < 0 and sense != "=":
            sense = "<=" if sense == ">=" else ">="
        if sense in ("<=", "="):
            ub_add[j] = min(ub_add[j], val)
        if sense in (">=", "="):
            lb_add[j] = max(lb_add[j], val)
    return np.array(keep, dtype=np.int64), lb_add, ub_add


class LPRelaxation:
    """Re-solvable LP over fixed rows with per-call column bounds.

    Single-entry rows are folded into column bounds once. With the simplex
    engine the last optimal basis is kept and reused as a warm start.
    """

    def __init__(self, c, A, senses, b, engine: str = "simplex", feas_tol: float = 1e-7,
                 opt_tol: float = 1e-9):
        if engine not in ("simplex", "highs"):
            raise ValueError(f"unknown LP engine {engine!r}")
        self.engine = engine
        self.c = np.asarray(c, dtype=float)
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        A = sp.csr_matrix(A)
        b = np.asarray(b, dtype=float)
        senses = list(senses)
        keep, self.lb_add, self.ub_add = _singleton_bounds(A, senses, b, len(self.c))
        A = A[keep]
        self.senses = [senses[i] for i in keep]
        self.b = b[keep]
        self._warm = None
        if engine == "simplex":
            self.A = A.toarray()
        else:
            senses = np.array(self.senses, dtype=object)
            le = np.flatnonzero(senses == "<=")
            ge = np.flatnonzero(senses == ">=")
            eq = np.flatnonzero(senses == "=")
            ub_rows = sp.vstack([A[le], -A[ge]]).tocsr()
            self.A_ub = ub_rows if ub_rows.shape[0] else None
            self.b_ub = np.concatenate([self.b[le], -self.b[ge]]) if ub_rows.shape[0] else None
            self.A_eq = A[eq] if len(eq) else None
            self.b_eq = self.b[eq] if len(eq) else None

    def solve(self, lb, ub) -> LPResult:
        lb = np.maximum(np.asarray(lb, dtype=float), self.lb_add)
        ub = np.minimum(np.asarray(ub, dtype=float), self.ub_add)
        if np.any(lb > ub + self.feas_tol * (1.0 + np.abs(lb))):
            return LPResult(INFEASIBLE, None, None, 0)
        ub = np.maximum(ub, lb)
        if self.engine == "simplex":
            try:
                res = simplex(self.c, self.A, self.senses, self.b, lb, ub,
                              feas_tol=self.feas_tol, opt_tol=self.opt_tol, warm=self._warm)
            except NumericalStall:
                if self._warm is None:
                    raise
                res = simplex(self.c, self.A, self.senses, self.b, lb, ub,
                              feas_tol=self.feas_tol, opt_tol=self.opt_tol)
            if res.basis is not None:
                self._warm = res.basis
            return res
        bounds = [(None if not np.isfinite(l) else l, None if not np.isfinite(u) else u)
                  for l, u in zip(lb, ub)]
        res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=bounds, method="highs",
                      options={"primal_feasibility_tolerance": self.feas_tol,
                               "dual_feasibility_tolerance": max(self.opt_tol, 1e-10)})
        if res.status == 0:
            return LPResult(OPTIMAL, np.asarray(res.x), float(res.fun), int(res.nit))
        if res.status == 2:
            return LPResult(INFEASIBLE, None, None, int(res.nit))
        if res.status == 3:
            return LPResult(UNBOUNDED, None, None, int(res.nit))
        raise NumericalStall(f"HiGHS LP ended with status {res.status}: {res.message}", float("nan"))
