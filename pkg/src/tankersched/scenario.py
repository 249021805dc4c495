"""Hybrid uncertainty scenarios: sampled demand plus a two-level travel-time tree.

Demand perturbations are drawn per ``(consumer, product, slot)`` cell from
its own PCG64 substream, keyed by a CRC32 hash of the cell identity and the
generator seed. Drawing more scenarios therefore never changes the earlier
ones, and cells can be generated in any order.
"""
from __future__ import annotations

import enum
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .instance import CongestionLevel, Instance

GENERATOR_NAME = "numpy.PCG64/SeedSequence(seed, spawn_key=(crc32(c), crc32(p), t))"
SCENARIO_SCHEMA_VERSION = 1

TRUNCATION = 0.2
DEFAULT_SIGMA = TRUNCATION / 3.0


class ScenarioKind(enum.Enum):
    DEMAND_ONLY = "DEMAND_ONLY"
    HYBRID = "HYBRID"


@dataclass(frozen=True)
class Scenario:
    id: int
    probability: float
    demand: dict  # (c, p) -> np.ndarray of length NT, kiloliters
    congestion: CongestionLevel = CongestionLevel.NOMINAL
    xi: dict = field(default_factory=dict)  # (c, p) -> np.ndarray perturbations
    base_id: int | None = None


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    kind: ScenarioKind
    generator_seed: int
    sigma: float = DEFAULT_SIGMA

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, k: int) -> Scenario:
        return self.scenarios[k]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def headline(self) -> int:
        """Index of the highest-probability scenario (first one on ties)."""
        return int(np.argmax(self.probabilities))


def _cell_rng(seed: int, c: str, p: str, t: int) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(zlib.crc32(c.encode()), zlib.crc32(p.encode()), int(t)),
    )
    return np.random.Generator(np.random.PCG64(ss))


def truncated_draws(rng: np.random.Generator, n: int, sigma: float = DEFAULT_SIGMA,
                    bound: float = TRUNCATION) -> np.ndarray:
    """``n`` draws of ``sigma * z`` (z standard normal) restricted to ``[-bound, bound]``.

    Truncation is by rejection, consumed in order, so the first ``n`` values
    of a stream do not depend on how many are requested.
    """
    out = np.empty(n)
    filled = 0
    while filled < n:
        z = sigma * rng.standard_normal()
        if -bound <= z <= bound:
            out[filled] = z
            filled += 1
    return out


def sample_demand_scenarios(inst: Instance, n: int, seed: int,
                            sigma: float = DEFAULT_SIGMA) -> ScenarioSet:
    """Draw ``n`` equiprobable demand scenarios around the mean demand."""
    if n < 1:
        raise ValueError("number of scenarios must be at least 1")
    nt = inst.horizon_nt
    xi: dict = {}
    for (c, p), prof in sorted(inst.demand.items()):
        mat = np.zeros((n, nt))
        for t in range(1, nt + 1):
            if prof[t - 1] > 0:
                mat[:, t - 1] = truncated_draws(_cell_rng(seed, c, p, t), n, sigma)
        xi[(c, p)] = mat
    scenarios = []
    for k in range(n):
        dem = {}
        xs = {}
        for cp, prof in sorted(inst.demand.items()):
            x = xi[cp][k]
            xs[cp] = x
            dem[cp] = np.asarray(prof, dtype=float) * (1.0 + x)
        scenarios.append(Scenario(id=k, probability=1.0 / n, demand=dem, xi=xs, base_id=k))
    return ScenarioSet(tuple(scenarios), ScenarioKind.DEMAND_ONLY, int(seed), sigma)


def mean_scenario(inst: Instance) -> ScenarioSet:
    """Single scenario at mean demand and nominal travel times."""
    dem = {cp: np.asarray(prof, dtype=float) for cp, prof in sorted(inst.demand.items())}
    xs = {cp: np.zeros(inst.horizon_nt) for cp in dem}
    sc = Scenario(id=0, probability=1.0, demand=dem, xi=xs, base_id=0)
    return ScenarioSet((sc,), ScenarioKind.DEMAND_ONLY, 0, 0.0)


def single(scen: ScenarioSet, k: int) -> ScenarioSet:
    """Scenario ``k`` alone with probability one."""
    s = scen[k]
    one = Scenario(id=0, probability=1.0, demand=s.demand, congestion=s.congestion,
                   xi=s.xi, base_id=s.base_id)
    return ScenarioSet((one,), scen.kind, scen.generator_seed, scen.sigma)


def expand_travel_time(base: ScenarioSet, p_high: float = 0.5) -> ScenarioSet:
    """Split every demand scenario into a nominal and a congested branch."""
    if base.kind is not ScenarioKind.DEMAND_ONLY:
        raise ValueError("scenario set already carries travel-time branches")
    if not 0.0 <= p_high <= 1.0:
        raise ValueError("p_high must lie in [0, 1]")
    out = []
    for s in base.scenarios:
        for level, w in ((CongestionLevel.NOMINAL, 1.0 - p_high), (CongestionLevel.HIGH, p_high)):
            out.append(Scenario(id=len(out), probability=s.probability * w, demand=s.demand,
                                congestion=level, xi=s.xi, base_id=s.id))
    return ScenarioSet(tuple(out), ScenarioKind.HYBRID, base.generator_seed, base.sigma)


def uniform_scenarios(inst: Instance, demands: Sequence[dict],
                      congestion: Sequence[CongestionLevel] | None = None) -> ScenarioSet:
    """Equiprobable set from explicit demand dictionaries (testing helper)."""
    n = len(demands)
    congestion = congestion or [CongestionLevel.NOMINAL] * n
    sc = []
    for k, (dem, lev) in enumerate(zip(demands, congestion)):
        full = {cp: np.asarray(dem.get(cp, prof), dtype=float) for cp, prof in sorted(inst.demand.items())}
        xs = {cp: np.zeros(inst.horizon_nt) for cp in full}
        sc.append(Scenario(id=k, probability=1.0 / n, demand=full, congestion=lev, xi=xs, base_id=k))
    kind = ScenarioKind.HYBRID if any(c is CongestionLevel.HIGH for c in congestion) else ScenarioKind.DEMAND_ONLY
    return ScenarioSet(tuple(sc), kind, 0, 0.0)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def scenarios_to_dict(scen: ScenarioSet) -> dict:
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "generator": GENERATOR_NAME,
        "generator_seed": scen.generator_seed,
        "sigma": scen.sigma,
        "truncation": TRUNCATION,
        "kind": scen.kind.value,
        "scenarios": [
            {
                "id": s.id,
                "base_id": s.base_id,
                "probability": s.probability,
                "congestion": s.congestion.value,
                "demand": [{"consumer": c, "product": p, "values": [float(x) for x in arr]}
                           for (c, p), arr in sorted(s.demand.items())],
                "xi": [{"consumer": c, "product": p, "values": [float(x) for x in arr]}
                       for (c, p), arr in sorted(s.xi.items())],
            }
            for s in scen.scenarios
        ],
    }


def scenarios_from_dict(doc: dict) -> ScenarioSet:
    sc = []
    for d in doc["scenarios"]:
        dem = {(e["consumer"], e["product"]): np.array(e["values"], dtype=float) for e in d["demand"]}
        xs = {(e["consumer"], e["product"]): np.array(e["values"], dtype=float) for e in d.get("xi", [])}
        sc.append(Scenario(id=d["id"], probability=d["probability"], demand=dem,
                           congestion=CongestionLevel(d["congestion"]), xi=xs, base_id=d.get("base_id")))
    return ScenarioSet(tuple(sc), ScenarioKind(doc["kind"]), int(doc["generator_seed"]),
                       float(doc.get("sigma", DEFAULT_SIGMA)))


def dump_scenarios(scen: ScenarioSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenarios_to_dict(scen), indent=1) + "\n")


def load_scenarios(path: str | Path) -> ScenarioSet:
    return scenarios_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# SAA convergence
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceTrace:
    points: list[tuple[int, float]]
    n_star: int
    stabilized: bool
    band: float

    def to_rows(self) -> list[dict]:
        return [{"n": n, "objective": obj} for n, obj in self.points]


class SolveFailure(RuntimeError):
    def __init__(self, message: str, n: int | None = None, k: int | None = None, stage: str | None = None):
        super().__init__(message)
        self.n = n
        self.k = k
        self.stage = stage


def derive_seed(seed: int, n: int) -> int:
    """Seed for the sample of size ``n`` in a convergence sweep."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(0x5AA, int(n)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stabilization_point(points: Sequence[tuple[int, float]], band: float) -> tuple[int, bool]:
    """First N from which every later objective stays within ``band`` of their mean.

    A candidate needs at least two points in its window; when none qualifies
    the last N is returned with ``stabilized=False``.
    """
    objs = [o for _, o in points]
    for i in range(len(points) - 1):
        window = objs[i:]
        mean = sum(window) / len(window)
        scale = abs(mean) if mean != 0 else 1.0
        if all(abs(o - mean) <= band * scale for o in window):
            return points[i][0], True
    return points[-1][0], False


def saa_convergence(inst: Instance, n_start: int, n_step: int, n_max: int, band: float,
                    seed: int, solve_cfg=None, hybrid: bool = False, p_high: float = 0.5,
                    sigma: float = DEFAULT_SIGMA, on_solve=None) -> ConvergenceTrace:
    """Solve the stochastic model for growing sample sizes and locate N*.

    ``on_solve(n, scen, model, solution)`` is called after each solve, for
    callers that want to inspect the intermediate solutions.
    """
    from .formulation import build_tsr
    from .solver import SolveConfig, solve

    if n_start < 1 or n_step < 1 or n_max < n_start:
        raise ValueError("need n_start >= 1, n_step >= 1 and n_max >= n_start")
    cfg = solve_cfg or SolveConfig()
    points = []
    for n in range(n_start, n_max + 1, n_step):
        scen = sample_demand_scenarios(inst, n, derive_seed(seed, n), sigma)
        if hybrid:
            scen = expand_travel_time(scen, p_high)
        model = build_tsr(inst, scen)
        sol = solve(model, cfg)
        if not sol.has_incumbent:
            raise SolveFailure(f"stochastic model with N={n} ended {sol.status}", n=n)
        points.append((n, sol.objective))
        if on_solve is not None:
            on_solve(n, scen, model, sol)
    n_star, ok = stabilization_point(points, band)
    return ConvergenceTrace(points, n_star, ok, band)

