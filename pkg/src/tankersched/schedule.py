"""Operational artifacts read back from a solved model.

``extract_schedule`` turns one scenario of a solution into leg-level tanker
movements plus a per-TF operating timeline. ``replay_validate`` then
re-simulates those artifacts slot by slot against the instance data, without
looking at the model rows, as an independent soundness check.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .formulation import parse_name
from .instance import CongestionLevel, Instance, round_trip_slots, route_transit
from .milp import BINARY, MilpModel
from .scenario import ScenarioSet
from .solver import GAP_LIMIT, OPTIMAL, TIME_LIMIT, Solution

VOLUME_EPS = 1e-7


class ExtractionError(ValueError):
    def __init__(self, message: str, variables: Sequence[tuple[str, float]] = ()):
        super().__init__(message)
        self.variables = list(variables)


@dataclass(frozen=True)
class Movement:
    k: int
    region: str
    vehicle: str
    origin: str
    destination: str
    product: str
    dispatch: int
    arrival: int
    return_slot: int
    volume: float
    tankers: int
    kind: str = "delivery"  # "delivery" to a consumer or "raw" to a TF


@dataclass
class TFTimeline:
    source: str
    op: list[int]
    start: list[int]
    stop: list[int]
    product: list[str | None]


@dataclass
class Schedule:
    k: int
    congestion: CongestionLevel
    movements: list[Movement]
    timelines: dict[str, TFTimeline]
    pool_initial: dict[tuple[str, str, str], float] = field(default_factory=dict)

    def day(self, d: int) -> list[Movement]:
        lo, hi = 24 * (d - 1) + 1, 24 * d
        return [m for m in self.movements if lo <= m.dispatch <= hi]


_SCENARIO_FAMILIES = ("xPDL", "xRW", "yOp", "xSUP", "xSDn", "yPSl")


def _bucket(sol: Solution) -> tuple[dict[str, list], list]:
    """Split the assignment into per-scenario items and first-stage pool items."""
    per_k: dict[str, list] = {}
    pools = []
    for name, val in sol.assignment.items():
        fam, idx = parse_name(name)
        if fam in _SCENARIO_FAMILIES:
            per_k.setdefault(idx[-1], []).append((fam, idx, val))
        elif fam == "xVQini":
            pools.append((tuple(idx), float(val)))
    return per_k, pools


def _tankers(volume: float, capacity: float) -> int:
    return max(1, math.ceil(volume / capacity - 1e-9))


def _check_extractable(model: MilpModel, solution: Solution, int_tol: float) -> None:
    if solution.status not in (OPTIMAL, GAP_LIMIT, TIME_LIMIT) or not solution.assignment:
        raise ExtractionError(f"solution has no incumbent (status {solution.status})")
    bad = []
    for v in model.variables:
        if v.kind == BINARY:
            val = solution.assignment.get(v.name, 0.0)
            if abs(val - round(val)) > int_tol:
                bad.append((v.name, val))
    if bad:
        raise ExtractionError(f"{len(bad)} binary columns are fractional", bad)


def _build(inst: Instance, scen: ScenarioSet, k: int, items: list, pools: list) -> Schedule:
    level = scen[k].congestion
    nt = inst.horizon_nt
    moves: list[Movement] = []
    ops = {s: [0] * nt for s in inst.tf_sources}
    sup = {s: [0] * nt for s in inst.tf_sources}
    sdn = {s: [0] * nt for s in inst.tf_sources}
    prod: dict[str, list] = {s: [None] * nt for s in inst.tf_sources}
    for fam, idx, val in items:
        if fam in ("xPDL", "xRW"):
            s, dest, p, v, t, _ = idx
            if val <= VOLUME_EPS:
                continue
            t = int(t)
            leg = (s, dest)
            moves.append(Movement(
                k=k, region=inst.region_of(s), vehicle=v, origin=s, destination=dest,
                product=p, dispatch=t, arrival=t + route_transit(inst, leg, p, level),
                return_slot=t + round_trip_slots(inst, leg, p, v, level), volume=float(val),
                tankers=_tankers(val, inst.vehicles[v].capacity_kl),
                kind="delivery" if fam == "xPDL" else "raw"))
        elif fam in ("yOp", "xSUP", "xSDn"):
            s, t = idx[0], int(idx[1])
            {"yOp": ops, "xSUP": sup, "xSDn": sdn}[fam][s][t - 1] = int(round(val))
        elif fam == "yPSl" and round(val) == 1:
            prod[idx[0]][int(idx[2]) - 1] = idx[1]
    moves.sort(key=lambda m: (m.dispatch, m.region, m.vehicle, m.origin, m.destination, m.product))
    timelines = {s: TFTimeline(s, ops[s], sup[s], sdn[s], prod[s]) for s in inst.tf_sources}
    return Schedule(k, level, moves, timelines, dict(sorted(pools)))


def extract_schedule(inst: Instance, model: MilpModel, solution: Solution, scen: ScenarioSet,
                     k: int | None = None, int_tol: float = 1e-6) -> Schedule:
    """Movements and TF timelines of scenario ``k`` (default: the most probable one)."""
    _check_extractable(model, solution, int_tol)
    k = scen.headline() if k is None else int(k)
    if not 0 <= k < len(scen):
        raise ExtractionError(f"scenario {k} out of range 0..{len(scen) - 1}")
    per_k, pools = _bucket(solution)
    return _build(inst, scen, k, per_k.get(str(k), []), pools)


def extract_all(inst: Instance, model: MilpModel, solution: Solution, scen: ScenarioSet,
                int_tol: float = 1e-6) -> list[Schedule]:
    """One schedule per scenario, parsing the assignment once."""
    _check_extractable(model, solution, int_tol)
    per_k, pools = _bucket(solution)
    return [_build(inst, scen, k, per_k.get(str(k), []), pools) for k in range(len(scen))]


def source_consumer_map(solution: Solution) -> dict[tuple[str, str], list[tuple[str, float]]]:
    """Serving sources and planned volumes per (consumer, product)."""
    vol: dict[tuple[str, str], dict[str, float]] = {}
    for name, val in solution.assignment.items():
        fam, idx = parse_name(name)
        if fam != "xDeCon" or val <= VOLUME_EPS:
            continue
        s, c, p, _ = idx
        vol.setdefault((c, p), {})
        vol[(c, p)][s] = vol[(c, p)].get(s, 0.0) + val
    return {cp: sorted(d.items()) for cp, d in sorted(vol.items())}


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    family: str
    slot: int | None
    message: str


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def add(self, family: str, slot: int | None, message: str) -> None:
        self.violations.append(Violation(family, slot, message))


def _check_runs(rep: ViolationReport, inst: Instance, tl: TFTimeline) -> None:
    src = inst.sources[tl.source]
    nt = inst.horizon_nt
    prev = int(src.op_init)
    for t in range(1, nt + 1):
        on = tl.op[t - 1]
        if tl.start[t - 1] - tl.stop[t - 1] != on - prev:
            rep.add("tf_switching", t, f"{tl.source}: start/stop flags disagree with state change")
        if tl.start[t - 1] and tl.stop[t - 1]:
            rep.add("tf_switching", t, f"{tl.source}: started and stopped in one slot")
        if on and tl.product[t - 1] is None:
            rep.add("product_selection", t, f"{tl.source}: operating without a product")
        if not on and tl.product[t - 1] is not None:
            rep.add("product_selection", t, f"{tl.source}: producing while shut down")
        if on and not prev:
            end = min(nt, t + src.uptime_h - 1)
            if not all(tl.op[m - 1] for m in range(t, end + 1)):
                rep.add("min_up_down", t, f"{tl.source}: started and ran under {src.uptime_h} h")
        if prev and not on:
            end = min(nt, t + src.downtime_h - 1)
            if any(tl.op[m - 1] for m in range(t, end + 1)):
                rep.add("min_up_down", t, f"{tl.source}: restarted within {src.downtime_h} h")
        prev = on


def replay_validate(inst: Instance, scen: ScenarioSet, k: int, movements: Sequence[Movement],
                    timeline: Schedule | dict[str, TFTimeline], tol: float = 1e-6,
                    pool_initial: dict | None = None) -> ViolationReport:
    """Simulate scenario ``k`` slot by slot and report every broken rule.

    ``timeline`` is either the :class:`Schedule` from :func:`extract_schedule`
    (which also supplies the opening tanker pools) or a bare mapping of TF
    timelines, in which case pools start at the nominal availability unless
    ``pool_initial`` is given.
    """
    if isinstance(timeline, Schedule):
        pool_initial = timeline.pool_initial if pool_initial is None else pool_initial
        timelines = timeline.timelines
    else:
        timelines = timeline
    if pool_initial is None:
        pool_initial = {key: inst.vehicles[key[1]].capacity_kl * n
                        for key, n in inst.availability.items()}
    level = scen[k].congestion
    nt = inst.horizon_nt
    rep = ViolationReport()

    def near(a: float, b: float) -> bool:
        return abs(a - b) <= tol * (1.0 + abs(b))

    # transit consistency
    for m in movements:
        leg = (m.origin, m.destination)
        lag = route_transit(inst, leg, m.product, level)
        if m.arrival != m.dispatch + lag:
            rep.add("transit", m.dispatch,
                    f"{m.origin}->{m.destination} arrives at {m.arrival}, expected {m.dispatch + lag}")
        rts = round_trip_slots(inst, leg, m.product, m.vehicle, level)
        if m.return_slot != m.dispatch + rts or m.return_slot < m.arrival:
            rep.add("transit", m.dispatch,
                    f"{m.origin}->{m.destination} returns at {m.return_slot}, expected {m.dispatch + rts}")
        if m.volume > m.tankers * inst.vehicles[m.vehicle].capacity_kl * (1 + tol) + tol:
            rep.add("vehicle_aggregation", m.dispatch,
                    f"{m.origin}->{m.destination}: {m.volume:.6g} KL exceeds {m.tankers} tanker(s)")

    # tanker pools
    for key in sorted(inst.rvp):
        r, v, p = key
        level_kl = float(pool_initial.get(key, 0.0))
        out = [0.0] * (nt + 2)
        back = [0.0] * (nt + 2)
        for m in movements:
            if (m.region, m.vehicle, m.product) == key:
                out[m.dispatch] += m.volume
                if m.return_slot <= nt:
                    back[m.return_slot] += m.volume
        for t in range(1, nt + 1):
            level_kl += back[t] - out[t]
            if level_kl < -tol * (1.0 + abs(pool_initial.get(key, 0.0))):
                rep.add("tanker_flow", t, f"pool {r}/{v}/{p} short by {-level_kl:.6g} KL")

    # groundwater extraction
    for s in inst.sources_of_type("GW"):
        smax = inst.sources[s].smax_klph
        if smax <= 0:
            continue
        per_t = [0.0] * (nt + 1)
        for m in movements:
            if m.kind == "raw" and m.origin == s:
                per_t[m.dispatch] += m.volume
        for t in range(1, nt + 1):
            if per_t[t] > smax * (1 + tol) + tol:
                rep.add("gw_limit", t, f"{s} extracts {per_t[t]:.6g} KL, limit {smax:.6g}")

    # TF operation and inventories
    for s in inst.tf_sources:
        tl = timelines.get(s)
        if tl is None:
            rep.add("tf_switching", None, f"no timeline for {s}")
            continue
        _check_runs(rep, inst, tl)
        src = inst.sources[s]
        for (s2, i, p), spec in sorted(inst.inventory.items()):
            if s2 != s:
                continue
            q = spec.initial_kl
            flow_in = [0.0] * (nt + 2)
            flow_out = [0.0] * (nt + 2)
            for m in movements:
                if i == "RWI" and m.kind == "raw" and m.destination == s and m.product == p:
                    if m.arrival <= nt:
                        flow_in[m.arrival] += m.volume
                if i == "TWI" and m.kind == "delivery" and m.origin == s and m.product == p:
                    flow_out[m.dispatch] += m.volume
            for t in range(1, nt + 1):
                made = tl.product[t - 1]
                if i == "RWI":
                    if made is not None:
                        flow_out[t] += src.throughput_klph / src.recovery[made]
                elif made == p:
                    flow_in[t] += src.throughput_klph
                q += flow_in[t] - flow_out[t]
                lo, hi = spec.min_kl, spec.max_kl
                if q < lo - tol * (1.0 + abs(lo)):
                    rep.add("capacity_bounds", t, f"{s}/{i}/{p} at {q:.6g} KL below minimum {lo:.6g}")
                if q > hi + tol * (1.0 + abs(hi)):
                    rep.add("capacity_bounds", t, f"{s}/{i}/{p} at {q:.6g} KL above maximum {hi:.6g}")
    return rep


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

MOVEMENT_COLUMNS = ("k", "region", "vehicle", "kind", "origin", "destination", "product",
                    "dispatch", "arrival", "return_slot", "volume", "tankers")


def movements_to_csv(movements: Sequence[Movement]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=MOVEMENT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for m in movements:
        row = asdict(m)
        row["volume"] = round(m.volume, 6)
        w.writerow({c: row[c] for c in MOVEMENT_COLUMNS})
    return buf.getvalue()


def timelines_to_csv(sched: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "slot", "op", "start", "stop", "product"])
    for s, tl in sorted(sched.timelines.items()):
        for t in range(len(tl.op)):
            w.writerow([s, t + 1, tl.op[t], tl.start[t], tl.stop[t], tl.product[t] or ""])
    return buf.getvalue()


def gantt_document(sched: Schedule) -> dict:
    """Lanes per (region, vehicle type); each bar spans dispatch to return."""
    lanes: dict[str, list] = {}
    for m in sched.movements:
        lanes.setdefault(f"{m.region}/{m.vehicle}", []).append({
            "start": m.dispatch, "arrival": m.arrival, "end": m.return_slot,
            "label": f"{m.origin}->{m.destination} {m.product}",
            "volume": round(m.volume, 6), "tankers": m.tankers,
        })
    tf = {s: [{"slot": t + 1, "product": tl.product[t]} for t in range(len(tl.op)) if tl.op[t]]
          for s, tl in sorted(sched.timelines.items())}
    return {"scenario": sched.k, "congestion": sched.congestion.value,
            "lanes": {k: lanes[k] for k in sorted(lanes)}, "tf_operation": tf}
