from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

OPTIMAL = "OPTIMAL"
GAP_LIMIT = "GAP_LIMIT"  # stopped by the node limit; incumbent and honest gap reported
TIME_LIMIT = "TIME_LIMIT"
INFEASIBLE = "INFEASIBLE"
UNBOUNDED = "UNBOUNDED"

STATUSES = (OPTIMAL, GAP_LIMIT, TIME_LIMIT, INFEASIBLE, UNBOUNDED)

GAP_EPS = 1e-9


class NumericalStall(RuntimeError):
    """The simplex made no progress; carries the last basis condition estimate."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (basis condition estimate {condition:.3e})")
        self.condition = condition


@dataclass
class SolveConfig:
    """Solver settings. ``backend`` is ``"bnb"`` (bundled branch-and-bound)
    or ``"highs"`` (HiGHS through SciPy). ``lp_engine`` selects the LP
    relaxation solver used by ``"bnb"``."""

    backend: str = "bnb"
    lp_engine: str = "simplex"
    gap_limit: float = 0.01
    time_limit_s: float = 36000.0
    node_limit: int | None = None
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    opt_tol: float = 1e-9
    jobs: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def relative_gap(objective: float | None, bound: float | None) -> float | None:
    if objective is None or bound is None:
        return None
    if not (math.isfinite(objective) and math.isfinite(bound)):
        return math.inf
    return max(0.0, objective - bound) / max(abs(objective), GAP_EPS)


@dataclass
class Solution:
    status: str
    assignment: dict[str, float] = field(default_factory=dict)
    objective: float | None = None
    bound: float | None = None
    gap: float | None = None
    node_count: int = 0
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    certificate: list[float] | None = None
    x: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def has_incumbent(self) -> bool:
        return self.status in (OPTIMAL, GAP_LIMIT, TIME_LIMIT) and bool(self.assignment)

    def value(self, name: str, default: float = 0.0) -> float:
        return self.assignment.get(name, default)

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "node_count": self.node_count,
            "config": self.config,
            "assignment": self.assignment,
        }
        if self.certificate is not None:
            doc["certificate"] = self.certificate
        if include_timing:
            doc["wall_time"] = self.wall_time
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Solution":
        return cls(status=doc["status"], assignment=dict(doc.get("assignment", {})),
                   objective=doc.get("objective"), bound=doc.get("bound"), gap=doc.get("gap"),
                   node_count=doc.get("node_count", 0), wall_time=doc.get("wall_time", 0.0),
                   config=doc.get("config", {}), certificate=doc.get("certificate"))

    def dump(self, path: str | Path, include_timing: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_timing), indent=1) + "\n")


def load_solution(path: str | Path) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()))
