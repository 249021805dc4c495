"""Seeded random MILPs and an exhaustive-fixing reference solver."""
import itertools
import math

import numpy as np
from scipy.optimize import linprog

from tankersched.milp import BINARY, CONTINUOUS, EQ, GE, LE, MilpModel


def random_milp(seed: int) -> MilpModel:
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, 13))
    nc = int(rng.integers(0, 9))
    m = int(rng.integers(1, 41))
    model = MilpModel(f"rand{seed}")
    cols = [model.add_var(f"b{j}", BINARY) for j in range(nb)]
    cols += [model.add_var(f"x{j}", CONTINUOUS, 0.0, float(rng.integers(1, 20))) for j in range(nc)]
    for j in cols:
        model.set_cost(j, float(rng.integers(-20, 21)))
    # rows are built around a random binary point so most instances are feasible
    anchor = np.concatenate([rng.integers(0, 2, nb), np.zeros(nc)]).astype(float)
    broken = int(rng.integers(0, m)) if rng.random() < 0.1 else -1
    for i in range(m):
        k = int(rng.integers(1, min(len(cols), 6) + 1))
        sel = rng.choice(len(cols), size=k, replace=False)
        coefs = rng.integers(-9, 10, size=k).astype(float)
        coefs[coefs == 0] = 1.0
        act = float(coefs @ anchor[sel])
        u = rng.random()
        sense = LE if u < 0.6 else (GE if u < 0.9 else EQ)
        slack = float(rng.integers(0, 6))
        rhs = act + slack if sense == LE else (act - slack if sense == GE else act)
        if i == broken:  # an occasional instance has no feasible point
            rhs = rhs - 50 if sense == LE else rhs + 50
        model.add_row("r", f"r{i}", list(zip((cols[s] for s in sel), coefs)), sense, rhs)
    return model


def enumerate_optimum(model: MilpModel) -> float | None:
    """Fix every binary pattern and solve the remaining LP with HiGHS."""
    c, A, senses, b, lb, ub, integ = model.arrays()
    A = A.toarray()
    bins = np.flatnonzero(integ)
    le = np.array([s == LE for s in senses])
    ge = np.array([s == GE for s in senses])
    eq = np.array([s == EQ for s in senses])
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([b[le], -b[ge]])
    best = math.inf
    for pattern in itertools.product((0.0, 1.0), repeat=len(bins)):
        lo, hi = lb.copy(), ub.copy()
        lo[bins] = pattern
        hi[bins] = pattern
        res = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                      bounds=list(zip(lo, hi)), method="highs")
        if res.status == 0:
            best = min(best, float(res.fun))
    return None if best == math.inf else best
