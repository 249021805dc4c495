"""Sparse linear model container with stage tags and MPS export."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "C"
BINARY = "B"

FIRST = 0  # stage tag of first-stage (scenario independent) columns
SECOND = 1

LE, GE, EQ = "<=", ">=", "="


class ModelError(ValueError):
    """Structural problem in a model (dangling references, bad indices...)."""


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float
    stage: int
    scenario: int | None
    family: str


@dataclass(frozen=True)
class Row:
    name: str
    family: str
    cols: tuple[int, ...]
    vals: tuple[float, ...]
    sense: str
    rhs: float


def var_name(family: str, *index) -> str:
    return f"{family}({','.join(str(i) for i in index)})"


class MilpModel:
    """Minimisation model over bounded columns and sparse rows.

    Columns carry a stage tag and, for second-stage columns, the scenario
    index they belong to. Rows are kept in insertion order, which the
    builders make canonical (family order, then index order).
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.index: dict[str, int] = {}
        self.rows: list[Row] = []
        self.obj: dict[int, float] = {}
        self.obj_component: dict[int, str] = {}
        self.obj_constant = 0.0
        self.family_counts: Counter = Counter()
        self.metadata: dict = {}

    # ---- construction ----------------------------------------------------
    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0,
                ub: float = math.inf, stage: int = FIRST, scenario: int | None = None,
                family: str | None = None) -> int:
        if name in self.index:
            raise ModelError(f"duplicate variable {name}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        j = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub), stage, scenario,
                                       family or name.split("(", 1)[0]))
        self.index[name] = j
        return j

    def col(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ModelError(f"row references unknown variable {name}") from None

    def add_row(self, family: str, name: str, terms: Iterable[tuple[int, float]],
                sense: str, rhs: float) -> int:
        if sense not in (LE, GE, EQ):
            raise ModelError(f"bad sense {sense!r}")
        acc: dict[int, float] = {}
        n = len(self.variables)
        for j, a in terms:
            if not 0 <= j < n:
                raise ModelError(f"row {name} references column {j} out of range")
            acc[j] = acc.get(j, 0.0) + float(a)
        cols = tuple(sorted(j for j, a in acc.items() if a != 0.0))
        vals = tuple(acc[j] for j in cols)
        if not all(math.isfinite(a) for a in vals) or not math.isfinite(rhs):
            raise ModelError(f"row {name} has non-finite data")
        self.rows.append(Row(name, family, cols, vals, sense, float(rhs)))
        self.family_counts[family] += 1
        return len(self.rows) - 1

    def set_cost(self, j: int, coef: float, component: str = "objective") -> None:
        if coef == 0.0:
            return
        self.obj[j] = self.obj.get(j, 0.0) + float(coef)
        self.obj_component[j] = component

    # ---- views ---------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def count_kind(self, kind: str) -> int:
        return sum(1 for v in self.variables if v.kind == kind)

    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.kind == BINARY]

    def first_stage(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.stage == FIRST]

    def arrays(self):
        """Return ``(c, A, senses, rhs, lb, ub, integrality)`` with ``A`` in CSR form."""
        n, m = self.n_vars, self.n_rows
        c = np.zeros(n)
        for j, a in self.obj.items():
            c[j] = a
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for row in self.rows:
            indices.extend(row.cols)
            data.extend(row.vals)
            indptr.append(len(indices))
        A = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                           np.array(indptr, dtype=np.int64)), shape=(m, n))
        senses = np.array([r.sense for r in self.rows], dtype=object)
        rhs = np.array([r.rhs for r in self.rows], dtype=float)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integ = np.array([1 if v.kind == BINARY else 0 for v in self.variables], dtype=np.int8)
        return c, A, senses, rhs, lb, ub, integ

    def objective_value(self, x) -> float:
        return self.obj_constant + sum(a * float(x[j]) for j, a in self.obj.items())

    def component_values(self, x) -> dict[str, float]:
        out: dict[str, float] = {}
        for j, a in self.obj.items():
            comp = self.obj_component.get(j, "objective")
            out[comp] = out.get(comp, 0.0) + a * float(x[j])
        return out

    def assignment_vector(self, assignment: dict[str, float]) -> np.ndarray:
        missing = [v.name for v in self.variables if v.name not in assignment]
        if missing:
            raise ModelError(f"assignment is missing {len(missing)} variables, e.g. {missing[0]}")
        return np.array([assignment[v.name] for v in self.variables], dtype=float)

    def check_structure(self) -> list[str]:
        """Return structural problems (stage tags, dangling references)."""
        problems = []
        for v in self.variables:
            if v.stage == FIRST and v.scenario is not None:
                problems.append(f"first-stage column {v.name} carries scenario {v.scenario}")
            if v.stage == SECOND and v.scenario is None:
                problems.append(f"second-stage column {v.name} has no scenario")
        n = self.n_vars
        for r in self.rows:
            if any(j >= n for j in r.cols):
                problems.append(f"row {r.name} references a missing column")
        return problems

    def summary(self) -> dict:
        return {
            "name": self.name,
            "variables": self.n_vars,
            "binary": self.count_kind(BINARY),
            "continuous": self.count_kind(CONTINUOUS),
            "constraints": self.n_rows,
            "families": dict(sorted(self.family_counts.items())),
        }


# ---------------------------------------------------------------------------
# MPS (free format; column names exceed the 8-character fixed fields)
# ---------------------------------------------------------------------------

_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


def _num(x: float) -> str:
    return repr(float(x))


def write_mps(model: MilpModel, path: str | Path) -> None:
    """Write the model in free-format MPS (minimisation)."""
    lines = [f"NAME {model.name}", "ROWS", " N OBJ"]
    rnames = [f"R{i}_{r.name}" for i, r in enumerate(model.rows)]
    for rn, r in zip(rnames, model.rows):
        lines.append(f" {_SENSE_CODE[r.sense]} {rn}")
    cols: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for j, a in model.obj.items():
        cols[j].append(("OBJ", a))
    for rn, r in zip(rnames, model.rows):
        for j, a in zip(r.cols, r.vals):
            cols[j].append((rn, a))
    lines.append("COLUMNS")
    in_int = False
    for j, v in enumerate(model.variables):
        is_int = v.kind == BINARY
        if is_int and not in_int:
            lines.append(" MARKER 'MARKER' 'INTORG'")
            in_int = True
        elif not is_int and in_int:
            lines.append(" MARKER 'MARKER' 'INTEND'")
            in_int = False
        if not cols[j]:
            lines.append(f" {v.name} OBJ 0.0")
        for rn, a in cols[j]:
            lines.append(f" {v.name} {rn} {_num(a)}")
    if in_int:
        lines.append(" MARKER 'MARKER' 'INTEND'")
    lines.append("RHS")
    if model.obj_constant:
        lines.append(f" RHS OBJ {_num(-model.obj_constant)}")
    for rn, r in zip(rnames, model.rows):
        if r.rhs != 0.0:
            lines.append(f" RHS {rn} {_num(r.rhs)}")
    lines.append("BOUNDS")
    for v in model.variables:
        if v.kind == BINARY and v.lb == 0.0 and v.ub == 1.0:
            lines.append(f" BV BND {v.name}")
            continue
        if v.lb == v.ub:
            lines.append(f" FX BND {v.name} {_num(v.lb)}")
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" FR BND {v.name}")
            continue
        if v.lb == -math.inf:
            lines.append(f" MI BND {v.name}")
        elif v.lb != 0.0:
            lines.append(f" LO BND {v.name} {_num(v.lb)}")
        if v.ub != math.inf:
            lines.append(f" UP BND {v.name} {_num(v.ub)}")
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mps(path: str | Path) -> MilpModel:
    """Read a free-format MPS file into a model (all columns first stage)."""
    section = None
    name = "model"
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    entries: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    integer = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0]
            if section == "NAME" and len(tok) > 1:
                name = tok[1]
            continue
        try:
            if section == "ROWS":
                code, rn = tok
                if code == "N":
                    obj_row = obj_row or rn
                else:
                    row_sense[rn] = _CODE_SENSE[code]
                    row_order.append(rn)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    integer = tok[2] == "'INTORG'"
                    continue
                cn = tok[0]
                if cn not in entries:
                    col_order.append(cn)
                    entries[cn] = []
                    col_int[cn] = integer
                for k in range(1, len(tok) - 1, 2):
                    entries[cn].append((tok[k], float(tok[k + 1])))
            elif section == "RHS":
                for k in range(1, len(tok) - 1, 2):
                    rhs[tok[k]] = float(tok[k + 1])
            elif section == "BOUNDS":
                code, cn = tok[0], tok[2]
                val = float(tok[3]) if len(tok) > 3 else 0.0
                lb, ub = bounds.setdefault(cn, [0.0, math.inf])
                if code == "UP":
                    bounds[cn] = [lb, val]
                elif code == "LO":
                    bounds[cn] = [val, ub]
                elif code == "FX":
                    bounds[cn] = [val, val]
                elif code == "FR":
                    bounds[cn] = [-math.inf, math.inf]
                elif code == "MI":
                    bounds[cn] = [-math.inf, ub]
                elif code == "BV":
                    bounds[cn] = [0.0, 1.0]
                    col_int[cn] = True
                else:
                    raise ModelError(f"unsupported bound type {code}")
        except (ValueError, KeyError, IndexError) as exc:
            raise ModelError(f"{path}: line {lineno}: cannot parse {raw!r}") from exc
    model = MilpModel(name)
    for cn in col_order:
        lb, ub = bounds.get(cn, [0.0, math.inf])
        model.add_var(cn, BINARY if col_int[cn] else CONTINUOUS, lb, ub)
    by_row: dict[str, list[tuple[int, float]]] = {rn: [] for rn in row_order}
    for cn in col_order:
        j = model.index[cn]
        for rn, a in entries[cn]:
            if rn == obj_row:
                model.set_cost(j, a)
            else:
                by_row[rn].append((j, a))
    for rn in row_order:
        model.add_row("mps", rn, by_row[rn], row_sense[rn], rhs.get(rn, 0.0))
    if obj_row in rhs:
        model.obj_constant = -rhs[obj_row]
    return model
