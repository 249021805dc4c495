"""Bounded-variable simplex (dense revised form, primal and dual).

Meant for the small and medium LPs met inside branch-and-bound on toy and
test-scale models. Rows are turned into equalities with bounded logical
columns. When a dual-feasible basis is available (a warm start, or the
all-logical basis when costs allow) the dual method runs; otherwise the
two-phase primal method, where rows whose logical cannot absorb the starting
residual get an artificial column driven to zero in phase one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .solution import INFEASIBLE, OPTIMAL, UNBOUNDED, NumericalStall

_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64
_DEGENERATE_SWITCH = 40


@dataclass
class Basis:
    """Restartable simplex state over the columns ``[A | I]``."""
    basic: list[int]
    at_upper: np.ndarray  # nonbasic columns resting at their upper bound
    binv: np.ndarray | None = None  # inverse of the basis matrix, when still trusted
    age: int = 0  # eta updates applied to ``binv`` since it was last inverted afresh


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int
    certificate: np.ndarray | None = None  # Farkas duals (infeasible) or ray (unbounded)
    basis: Basis | None = None


def _slack_bounds(sense: str) -> tuple[float, float]:
    if sense == "<=":
        return 0.0, math.inf
    if sense == ">=":
        return -math.inf, 0.0
    return 0.0, 0.0


class _Tableau:
    def __init__(self, M, b, lb, ub, basis, x, feas_tol, opt_tol, max_iter,
                 binv=None, age=0):
        self.M = M
        self.MT = sp.csr_matrix(M.T)  # pricing products go through the sparse transpose
        self.MC = sp.csc_matrix(M)
        self.b = b
        self.lb = lb
        self.ub = ub
        self.basis = basis
        self.x = x
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.iterations = 0
        if binv is not None and age < _REFACTOR_EVERY:
            # only bounds changed since this inverse was valid
            self.Binv = binv.copy()
            self.age = age
            self.update_basic_values()
        else:
            self.refactor()

    def refactor(self):
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalStall("singular basis", float(np.linalg.cond(B))) from exc
        self.age = 0
        self.update_basic_values()

    def update_basic_values(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.b - self.MT.T @ xn
        self.x[self.basis] = self.Binv @ rhs

    def column(self, j: int) -> np.ndarray:
        lo, hi = self.MC.indptr[j], self.MC.indptr[j + 1]
        return self.Binv[:, self.MC.indices[lo:hi]] @ self.MC.data[lo:hi]

    def pivot(self, r: int, alpha: np.ndarray):
        """Eta update of the basis inverse; only rows with alpha != 0 change."""
        row_r = self.Binv[r, :] / alpha[r]
        rows = np.flatnonzero(alpha)
        rows = rows[rows != r]
        self.Binv[rows] -= np.outer(alpha[rows], row_r)
        self.Binv[r, :] = row_r

    def run(self, cost: np.ndarray) -> tuple[str, np.ndarray | None]:
        """Optimise ``cost`` from the current basis. Returns (status, ray)."""
        M, lb, ub, x = self.M, self.lb, self.ub, self.x
        m, N = M.shape
        degenerate = 0
        is_basic = np.zeros(N, dtype=bool)
        is_basic[self.basis] = True
        movable = lb < ub
        while True:
            if self.iterations >= self.max_iter:
                cond = float(np.linalg.cond(M[:, self.basis]))
                raise NumericalStall(f"iteration limit {self.max_iter} reached", cond)
            if self.age >= _REFACTOR_EVERY:
                self.refactor()
            y = cost[self.basis] @ self.Binv
            d = cost - self.MT @ y
            at_lb = x <= lb + self.feas_tol
            at_ub = x >= ub - self.feas_tol
            cand_up = (~is_basic) & movable & (d < -self.opt_tol) & ~at_ub
            cand_dn = (~is_basic) & movable & (d > self.opt_tol) & ~at_lb
            cand = cand_up | cand_dn
            if not cand.any():
                return OPTIMAL, None
            idx = np.flatnonzero(cand)
            if degenerate >= _DEGENERATE_SWITCH:
                j = int(idx[0])  # Bland's rule
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if cand_up[j] else -1.0
            alpha = self.column(j)
            delta = direction * alpha  # basic values move by -theta * delta

            lbB = lb[self.basis]
            ubB = ub[self.basis]
            xB = x[self.basis]
            dec = delta > _PIVOT_TOL
            inc = delta < -_PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                relaxed = np.full(m, math.inf)
                exact = np.full(m, math.inf)
                sel = dec & np.isfinite(lbB)
                relaxed[sel] = (xB[sel] - lbB[sel] + self.feas_tol) / delta[sel]
                exact[sel] = (xB[sel] - lbB[sel]) / delta[sel]
                sel = inc & np.isfinite(ubB)
                relaxed[sel] = (ubB[sel] - xB[sel] + self.feas_tol) / (-delta[sel])
                exact[sel] = (ubB[sel] - xB[sel]) / (-delta[sel])
            theta_max = float(relaxed.min()) if m else math.inf
            flip = ub[j] - lb[j]
            if not math.isfinite(theta_max) and not math.isfinite(flip):
                ray = np.zeros(N)
                ray[j] = direction
                ray[self.basis] = -delta
                return UNBOUNDED, ray
            if flip <= theta_max:
                # bound flip, basis unchanged
                theta = flip
                x[j] = ub[j] if direction > 0 else lb[j]
                x[self.basis] = xB - theta * delta
                degenerate = 0 if theta > 1e-12 else degenerate + 1
                self.iterations += 1
                continue
            rows = np.flatnonzero(exact <= theta_max)
            if degenerate >= _DEGENERATE_SWITCH:
                r = int(rows[np.argmin(np.array(self.basis)[rows])])
            else:
                r = int(rows[np.argmax(np.abs(delta[rows]))])
            theta = max(0.0, float(exact[r]))
            x[j] = x[j] + direction * theta
            x[self.basis] = xB - theta * delta
            leave = self.basis[r]
            x[leave] = lb[leave] if delta[r] > 0 else ub[leave]
            self.pivot(r, alpha)
            is_basic[leave] = False
            is_basic[j] = True
            self.basis[r] = j
            degenerate = 0 if theta > 1e-12 else degenerate + 1
            self.age += 1
            self.iterations += 1

    def make_dual_feasible(self, cost: np.ndarray) -> bool:
        """Park nonbasic columns on the bound their reduced cost favours."""
        M, lb, ub, x = self.M, self.lb, self.ub, self.x
        y = cost[self.basis] @ self.Binv
        d = cost - self.MT @ y
        nb = np.ones(M.shape[1], dtype=bool)
        nb[self.basis] = False
        movable = nb & (lb < ub)
        want_up = movable & (d < -self.opt_tol)
        want_dn = movable & (d > self.opt_tol)
        if np.any(want_up & ~np.isfinite(ub)) or np.any(want_dn & ~np.isfinite(lb)):
            return False
        x[want_up] = ub[want_up]
        x[want_dn] = lb[want_dn]
        self.update_basic_values()
        return True

    def dual(self, cost: np.ndarray) -> tuple[str, np.ndarray | None]:
        """Dual simplex from a dual-feasible basis. Returns (status, farkas row)."""
        M, lb, ub, x = self.M, self.lb, self.ub, self.x
        m, N = M.shape
        is_basic = np.zeros(N, dtype=bool)
        is_basic[self.basis] = True
        movable = lb < ub
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                cond = float(np.linalg.cond(M[:, self.basis]))
                raise NumericalStall(f"iteration limit {self.max_iter} reached", cond)
            if self.age >= _REFACTOR_EVERY:
                self.refactor()
            basis = np.asarray(self.basis)
            xB = x[basis]
            below = lb[basis] - xB
            above = xB - ub[basis]
            viol = np.maximum(below, above)
            bad = np.flatnonzero(viol > self.feas_tol)
            if bad.size == 0:
                return OPTIMAL, None
            if degenerate >= _DEGENERATE_SWITCH:
                r = int(bad[np.argmin(basis[bad])])
            else:
                r = int(bad[np.argmax(viol[bad])])
            raise_r = below[r] > above[r]
            y = cost[basis] @ self.Binv
            d = cost - self.MT @ y
            rho = self.Binv[r, :]
            arow = self.MT @ rho
            can_up = ~is_basic & movable & (x < ub - self.feas_tol)
            can_dn = ~is_basic & movable & (x > lb + self.feas_tol)
            if raise_r:
                elig = ((arow < -_PIVOT_TOL) & can_up) | ((arow > _PIVOT_TOL) & can_dn)
            else:
                elig = ((arow > _PIVOT_TOL) & can_up) | ((arow < -_PIVOT_TOL) & can_dn)
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return INFEASIBLE, (-rho if raise_r else rho)
            absd = np.abs(d[idx])
            absa = np.abs(arow[idx])
            step = float(np.min((absd + self.opt_tol) / absa))
            ties = idx[absd / absa <= step]
            if degenerate >= _DEGENERATE_SWITCH:
                q = int(ties[0])
            else:
                q = int(ties[np.argmax(np.abs(arow[ties]))])
            alpha = self.column(q)
            leave = self.basis[r]
            bound = lb[leave] if raise_r else ub[leave]
            dx = (x[leave] - bound) / alpha[r]
            x[q] += dx
            x[basis] = xB - alpha * dx
            x[leave] = bound
            self.pivot(r, alpha)
            is_basic[leave] = False
            is_basic[q] = True
            self.basis[r] = q
            degenerate = degenerate + 1 if abs(d[q]) / abs(arow[q]) < 1e-12 else 0
            self.age += 1
            self.iterations += 1


def _nonbasic_start(lb, ub, at_upper):
    return np.where(at_upper & np.isfinite(ub), ub,
                    np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0)))


def _result(tab: _Tableau, c: np.ndarray, n: int, m: int) -> LPResult:
    xs = tab.x[:n].copy()
    at_upper = np.zeros(n + m, dtype=bool)
    full = tab.x[:n + m]
    at_upper[:] = np.isfinite(tab.ub[:n + m]) & (full >= tab.ub[:n + m] - tab.feas_tol)
    basis = None
    if all(j < n + m for j in tab.basis):
        basis = Basis(list(tab.basis), at_upper, tab.Binv, tab.age)
    return LPResult(OPTIMAL, xs, float(c @ xs), tab.iterations, basis=basis)


def _box_only(c, lb, ub) -> LPResult:
    """No rows left: each column sits at whichever bound its cost prefers."""
    down = c < 0
    ray = np.where(down & ~np.isfinite(ub), 1.0, np.where((c > 0) & ~np.isfinite(lb), -1.0, 0.0))
    if ray.any():
        return LPResult(UNBOUNDED, None, None, 0, certificate=ray)
    x = np.where(down, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0)))
    return LPResult(OPTIMAL, x, float(c @ x), 0, basis=Basis([], np.zeros(len(c), dtype=bool)))


def simplex(c, A, senses, b, lb, ub, feas_tol: float = 1e-7, opt_tol: float = 1e-9,
            max_iter: int = 200_000, warm: Basis | None = None) -> LPResult:
    """Minimise ``c @ x`` subject to ``A x (senses) b`` and ``lb <= x <= ub``.

    A dual simplex is used whenever a dual-feasible starting basis is at hand
    (``warm``, or the all-logical basis); otherwise a two-phase primal.
    """
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(lb > ub + feas_tol):
        return LPResult(INFEASIBLE, None, None, 0)
    if m == 0:
        return _box_only(c, lb, ub)
    slb = np.empty(m)
    sub = np.empty(m)
    for i, s in enumerate(senses):
        slb[i], sub[i] = _slack_bounds(s)
    M = np.hstack([A, np.eye(m)])
    full_lb = np.concatenate([lb, slb])
    full_ub = np.concatenate([ub, sub])
    cost = np.concatenate([c, np.zeros(m)])

    starts = []
    if warm is not None and len(warm.at_upper) == n + m and len(warm.basic) == m:
        starts.append((list(warm.basic), warm.at_upper, warm.binv, warm.age))
    starts.append((list(range(n, n + m)), (cost < 0) & np.isfinite(full_ub), None, 0))
    for basic, at_upper, binv, age in starts:
        x = _nonbasic_start(full_lb, full_ub, at_upper)
        try:
            tab = _Tableau(M, b, full_lb.copy(), full_ub.copy(), basic, x, feas_tol,
                           opt_tol, max_iter, binv, age)
        except NumericalStall:
            continue
        if not tab.make_dual_feasible(cost):
            continue
        status, farkas = tab.dual(cost)
        if status == INFEASIBLE:
            return LPResult(INFEASIBLE, None, None, tab.iterations, certificate=farkas)
        status, ray = tab.run(cost)
        if status == UNBOUNDED:  # pragma: no cover - a dual-feasible start rules this out
            return LPResult(UNBOUNDED, None, None, tab.iterations, certificate=ray[:n])
        return _result(tab, c, n, m)
    return _two_phase(A, c, senses, b, lb, ub, feas_tol, opt_tol, max_iter)


def _two_phase(A, c, senses, b, lb, ub, feas_tol, opt_tol, max_iter) -> LPResult:
    m, n = A.shape

    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    slb = np.empty(m)
    sub = np.empty(m)
    for i, s in enumerate(senses):
        slb[i], sub[i] = _slack_bounds(s)
    resid = b - A @ x0
    svals = np.clip(resid, slb, sub)
    excess = resid - svals
    need_art = np.abs(excess) > feas_tol * (1.0 + np.abs(b))
    art_rows = np.flatnonzero(need_art)
    k = len(art_rows)
    M = np.zeros((m, n + m + k))
    M[:, :n] = A
    M[:, n:n + m] = np.eye(m)
    for a, i in enumerate(art_rows):
        M[i, n + m + a] = 1.0 if excess[i] > 0 else -1.0
    full_lb = np.concatenate([lb, slb, np.zeros(k)])
    full_ub = np.concatenate([ub, sub, np.full(k, math.inf)])
    x = np.concatenate([x0, svals, np.abs(excess[art_rows])])
    basis = []
    art_of_row = {i: n + m + a for a, i in enumerate(art_rows)}
    for i in range(m):
        basis.append(art_of_row.get(i, n + i))
    # logicals of rows with artificials sit nonbasic at the clipped value
    tab = _Tableau(M, b, full_lb, full_ub, basis, x, feas_tol, opt_tol, max_iter)

    if k:
        cost1 = np.zeros(M.shape[1])
        cost1[n + m:] = 1.0
        tab.run(cost1)
        infeas = float(tab.x[n + m:].sum())
        if infeas > feas_tol * (1.0 + float(np.abs(b).max(initial=0.0))):
            y = cost1[tab.basis] @ tab.Binv
            return LPResult(INFEASIBLE, None, None, tab.iterations, certificate=y)
        tab.ub[n + m:] = 0.0
        tab.x[n + m:] = np.minimum(tab.x[n + m:], 0.0)
        tab.refactor()

    cost2 = np.concatenate([c, np.zeros(m + k)])
    status, ray = tab.run(cost2)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, None, tab.iterations, certificate=ray[:n])
    return _result(tab, c, n, m)
