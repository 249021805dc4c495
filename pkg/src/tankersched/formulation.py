"""Equivalent deterministic model builders: TSR, DT and EV variants.

First-stage columns (supply plan and extra tanker capacity) carry no
scenario index and exist once; everything else is replicated per scenario.
Row families are emitted in a fixed order so that the built model, and any
file written from it, is reproducible.
"""
from __future__ import annotations

import math
from typing import Mapping

from .instance import (CongestionLevel, Instance, round_trip_hours, round_trip_slots,
                       route_transit)
from .milp import BINARY, CONTINUOUS, EQ, FIRST, GE, LE, SECOND, MilpModel, ModelError, var_name
from .scenario import Scenario, ScenarioSet

FAMILIES = (
    "tf_switching",
    "min_up_down",
    "product_selection",
    "raw_inventory",
    "treated_inventory",
    "capacity_bounds",
    "buffer_target",
    "gw_limit",
    "demand_balance",
    "vehicle_aggregation",
    "time_capacity",
    "tanker_flow",
    "tanker_initial",
    "first_stage_fix",
)

# Column families decided before uncertainty resolves.
FIRST_STAGE = ("xDeCon", "xCDistb", "xSSupl", "xVSSupl", "xVExQ", "xVQini")

COST_COMPONENTS = ("distribution", "rw_supply", "target_penalty", "buffer_penalty",
                   "extra_tanker", "shortfall_penalty", "surplus_penalty")


def _check_scenarios(inst: Instance, scenarios) -> None:
    if not scenarios:
        raise ModelError("scenario set is empty")
    nt = inst.horizon_nt
    for k, sc in enumerate(scenarios):
        for cp in inst.demand:
            if cp not in sc.demand:
                raise ModelError(f"scenario {k} has no demand for {cp}")
            if len(sc.demand[cp]) != nt:
                raise ModelError(f"scenario {k} demand for {cp} has {len(sc.demand[cp])} "
                                 f"slots, instance has {nt}")
        extra = set(sc.demand) - set(inst.demand)
        if extra:
            raise ModelError(f"scenario {k} has demand for unknown cells {sorted(extra)}")
        if not sc.probability >= 0.0:
            raise ModelError(f"scenario {k} has invalid probability {sc.probability}")


class _Builder:
    def __init__(self, inst: Instance, scenarios, probabilities, deterministic: bool,
                 name: str):
        _check_scenarios(inst, scenarios)
        self.inst = inst
        self.scen = list(scenarios)
        self.prob = [float(p) for p in probabilities]
        self.det = deterministic
        self.m = MilpModel(name)
        self.nt = inst.horizon_nt
        self.K = range(len(self.scen))
        self.tfs = inst.tf_sources
        self.routes = inst.delivery_routes()
        self.legs = inst.delivery_legs()
        self.rw_routes = inst.rw_routes()
        self.rw_legs = inst.rw_legs()
        self.rvp = sorted(inst.rvp)
        self.inv = sorted(inst.inventory)
        self._lags = {}

    # ---- helpers -------------------------------------------------------
    def level(self, k: int) -> CongestionLevel:
        return self.scen[k].congestion

    def lag(self, origin: str, dest: str, p: str, k: int) -> int:
        key = (origin, dest, p, self.level(k))
        if key not in self._lags:
            self._lags[key] = route_transit(self.inst, (origin, dest), p, self.level(k))
        return self._lags[key]

    def add(self, family: str, idx: tuple, k: int | None = None, kind: str = CONTINUOUS,
            lb: float = 0.0, ub: float = math.inf) -> int:
        if k is None:
            return self.m.add_var(var_name(family, *idx), kind, lb, ub, FIRST, None, family)
        stage, sc = (FIRST, None) if self.det else (SECOND, k)
        return self.m.add_var(var_name(family, *idx, k), kind, lb, ub, stage, sc, family)

    def col(self, family: str, *idx) -> int:
        return self.m.col(var_name(family, *idx))

    def has(self, family: str, *idx) -> bool:
        return var_name(family, *idx) in self.m.index

    def row(self, family: str, idx: tuple, terms, sense: str, rhs: float) -> None:
        self.m.add_row(family, var_name(family, *idx), terms, sense, rhs)

    def tf_products(self, s: str) -> list[str]:
        return [p for p in self.inst.final_products if (s, p) in self.inst.sp]

    def demand(self, k: int, c: str, p: str, t: int) -> float:
        return float(self.scen[k].demand[(c, p)][t - 1])

    # ---- columns -------------------------------------------------------
    def columns(self) -> None:
        inst, T = self.inst, self.inst.slots
        for s, c, p in self.routes:
            for t in T:
                self.add("xDeCon", (s, c, p, t))
        for s, c, p, v in self.legs:
            self.add("xCDistb", (s, c, p, v))
        for s, s2, p in self.rw_routes:
            for t in T:
                self.add("xSSupl", (s, s2, p, t))
        for s, s2, p, v in self.rw_legs:
            self.add("xVSSupl", (s, s2, p, v))
        for r, v, p in self.rvp:
            self.add("xVExQ", (r, v, p))
            self.add("xVQini", (r, v, p))
        for k in self.K:
            for s in self.tfs:
                for t in T:
                    self.add("yOp", (s, t), k, BINARY)
                    self.add("xSUP", (s, t), k, ub=1.0)
                    self.add("xSDn", (s, t), k, ub=1.0)
                    for p in self.tf_products(s):
                        self.add("yPSl", (s, p, t), k, BINARY)
            for key in self.inv:
                s, i, p = key
                spec = inst.inventory[key]
                for t in T:
                    self.add("xQ", (s, i, p, t), k)
                    if i == "RWI":
                        self.add("xBCV", (s, i, p, t), k)
                    elif spec.target_kl[t - 1] > 0:
                        self.add("xTVp", (s, i, p, t), k)
                        self.add("xTVm", (s, i, p, t), k)
            for s, c, p, v in self.legs:
                for t in T:
                    self.add("xPDL", (s, c, p, v, t), k)
            for s, s2, p, v in self.rw_legs:
                for t in T:
                    self.add("xRW", (s, s2, p, v, t), k)
            for r, v, p in self.rvp:
                for t in T:
                    self.add("xVQ", (r, v, p, t), k)
            for (c, p) in inst.demand:
                if inst.products[p].kind != "final":
                    continue
                for t in T:
                    if self.demand(k, c, p, t) > 0:
                        self.add("dDemP", (c, p, t), k)
                        self.add("dDemM", (c, p, t), k)

    # ---- row families --------------------------------------------------
    def tf_switching(self) -> None:
        for s in self.tfs:
            op0 = float(self.inst.sources[s].op_init)
            for k in self.K:
                for t in self.inst.slots:
                    terms = [(self.col("xSUP", s, t, k), 1.0), (self.col("xSDn", s, t, k), -1.0),
                             (self.col("yOp", s, t, k), -1.0)]
                    if t == 1:
                        self.row("tf_switching", (s, t, k), terms, EQ, -op0)
                    else:
                        terms.append((self.col("yOp", s, t - 1, k), 1.0))
                        self.row("tf_switching", (s, t, k), terms, EQ, 0.0)

    def min_up_down(self) -> None:
        for s in self.tfs:
            src = self.inst.sources[s]
            for k in self.K:
                for t in self.inst.slots:
                    up = [(self.col("xSUP", s, m, k), 1.0)
                          for m in range(max(1, t - src.uptime_h + 1), t + 1)]
                    up.append((self.col("yOp", s, t, k), -1.0))
                    self.row("min_up_down", ("up", s, t, k), up, LE, 0.0)
                    dn = [(self.col("xSDn", s, m, k), 1.0)
                          for m in range(max(1, t - src.downtime_h + 1), t + 1)]
                    dn.append((self.col("yOp", s, t, k), 1.0))
                    self.row("min_up_down", ("down", s, t, k), dn, LE, 1.0)

    def product_selection(self) -> None:
        for s in self.tfs:
            prods = self.tf_products(s)
            for k in self.K:
                for t in self.inst.slots:
                    terms = [(self.col("yPSl", s, p, t, k), 1.0) for p in prods]
                    terms.append((self.col("yOp", s, t, k), -1.0))
                    self.row("product_selection", (s, t, k), terms, EQ, 0.0)

    def _inventory_rows(self, family: str, kind: str) -> None:
        inst = self.inst
        for key in self.inv:
            s, i, p = key
            if i != kind:
                continue
            src = inst.sources[s]
            q0 = inst.inventory[key].initial_kl
            for k in self.K:
                for t in inst.slots:
                    terms = [(self.col("xQ", s, i, p, t, k), 1.0)]
                    if t > 1:
                        terms.append((self.col("xQ", s, i, p, t - 1, k), -1.0))
                    if kind == "RWI":
                        for s1, s2, p2 in self.rw_routes:
                            if s2 != s or p2 != p:
                                continue
                            t0 = t - self.lag(s1, s, p, k)
                            if t0 > 0:
                                terms.append((self.col("xSSupl", s1, s, p, t0), -1.0))
                        for pf in self.tf_products(s):
                            rate = src.throughput_klph / src.recovery[pf]
                            terms.append((self.col("yPSl", s, pf, t, k), rate))
                    else:
                        if self.has("yPSl", s, p, t, k):
                            terms.append((self.col("yPSl", s, p, t, k), -src.throughput_klph))
                        for s1, c, p2 in self.routes:
                            if s1 == s and p2 == p:
                                terms.append((self.col("xDeCon", s, c, p, t), 1.0))
                    self.row(family, (s, i, p, t, k), terms, EQ, q0 if t == 1 else 0.0)

    def raw_inventory(self) -> None:
        self._inventory_rows("raw_inventory", "RWI")

    def treated_inventory(self) -> None:
        self._inventory_rows("treated_inventory", "TWI")

    def capacity_bounds(self) -> None:
        for key in self.inv:
            s, i, p = key
            spec = self.inst.inventory[key]
            for k in self.K:
                for t in self.inst.slots:
                    j = self.col("xQ", s, i, p, t, k)
                    self.row("capacity_bounds", ("min", s, i, p, t, k), [(j, 1.0)], GE, spec.min_kl)
                    self.row("capacity_bounds", ("max", s, i, p, t, k), [(j, 1.0)], LE, spec.max_kl)

    def buffer_target(self) -> None:
        for key in self.inv:
            s, i, p = key
            spec = self.inst.inventory[key]
            for k in self.K:
                for t in self.inst.slots:
                    j = self.col("xQ", s, i, p, t, k)
                    if i == "RWI":
                        self.row("buffer_target", ("buffer", s, i, p, t, k),
                                 [(j, 1.0), (self.col("xBCV", s, i, p, t, k), 1.0)],
                                 GE, spec.buffer_kl)
                    elif spec.target_kl[t - 1] > 0:
                        self.row("buffer_target", ("target", s, i, p, t, k),
                                 [(j, 1.0), (self.col("xTVp", s, i, p, t, k), -1.0),
                                  (self.col("xTVm", s, i, p, t, k), 1.0)],
                                 EQ, spec.target_kl[t - 1])

    def gw_limit(self) -> None:
        for s, s2, p in self.rw_routes:
            smax = self.inst.sources[s].smax_klph
            if smax <= 0:
                continue
            for k in self.K:
                for t in self.inst.slots:
                    self.row("gw_limit", (s, s2, p, t, k),
                             [(self.col("xSSupl", s, s2, p, t), 1.0)], LE, smax)

    def demand_balance(self) -> None:
        inst = self.inst
        for k in self.K:
            for (c, p) in inst.demand:
                if inst.products[p].kind != "final":
                    continue
                feeders = [s for s, c2, p2 in self.routes if c2 == c and p2 == p]
                for t in inst.slots:
                    de = self.demand(k, c, p, t)
                    if de <= 0:
                        continue
                    terms = []
                    for s in feeders:
                        t0 = t - self.lag(s, c, p, k)
                        if t0 > 0:
                            terms.append((self.col("xDeCon", s, c, p, t0), 1.0))
                    terms.append((self.col("dDemM", c, p, t, k), 1.0))
                    terms.append((self.col("dDemP", c, p, t, k), -1.0))
                    self.row("demand_balance", (c, p, t, k), terms, EQ, de)

    def vehicle_aggregation(self) -> None:
        T = self.inst.slots
        fam = "vehicle_aggregation"
        for k in self.K:
            for s, c, p in self.routes:
                terms = [(self.col("xDeCon", s, c, p, t), 1.0) for t in T]
                terms += [(self.col("xCDistb", s, c, p, v), -1.0)
                          for s2, c2, p2, v in self.legs if (s2, c2, p2) == (s, c, p)]
                self.row(fam, ("delivery_total", s, c, p, k), terms, EQ, 0.0)
            for s, s2, p in self.rw_routes:
                terms = [(self.col("xSSupl", s, s2, p, t), 1.0) for t in T]
                terms += [(self.col("xVSSupl", s, s2, p, v), -1.0)
                          for a, b, q, v in self.rw_legs if (a, b, q) == (s, s2, p)]
                self.row(fam, ("rw_total", s, s2, p, k), terms, EQ, 0.0)
            for s, c, p in self.routes:
                vs = [v for s2, c2, p2, v in self.legs if (s2, c2, p2) == (s, c, p)]
                for t in T:
                    terms = [(self.col("xPDL", s, c, p, v, t, k), 1.0) for v in vs]
                    terms.append((self.col("xDeCon", s, c, p, t), -1.0))
                    self.row(fam, ("delivery_slot", s, c, p, t, k), terms, EQ, 0.0)
            for s, c, p, v in self.legs:
                terms = [(self.col("xPDL", s, c, p, v, t, k), 1.0) for t in T]
                terms.append((self.col("xCDistb", s, c, p, v), -1.0))
                self.row(fam, ("delivery_vehicle", s, c, p, v, k), terms, EQ, 0.0)
            for s, s2, p in self.rw_routes:
                vs = [v for a, b, q, v in self.rw_legs if (a, b, q) == (s, s2, p)]
                for t in T:
                    terms = [(self.col("xRW", s, s2, p, v, t, k), 1.0) for v in vs]
                    terms.append((self.col("xSSupl", s, s2, p, t), -1.0))
                    self.row(fam, ("rw_slot", s, s2, p, t, k), terms, EQ, 0.0)
            for s, s2, p, v in self.rw_legs:
                terms = [(self.col("xRW", s, s2, p, v, t, k), 1.0) for t in T]
                terms.append((self.col("xVSSupl", s, s2, p, v), -1.0))
                self.row(fam, ("rw_vehicle", s, s2, p, v, k), terms, EQ, 0.0)

    def _pool_legs(self, r: str, v: str, p: str):
        inst = self.inst
        dl = [leg for leg in self.legs
              if leg[3] == v and leg[2] == p and inst.region_of(leg[0]) == r]
        rl = [leg for leg in self.rw_legs
              if leg[3] == v and leg[2] == p and inst.region_of(leg[0]) == r]
        return dl, rl

    def _check_pools(self) -> None:
        inst = self.inst
        pools = set(self.rvp)
        for s, _, p, v in self.legs + self.rw_legs:
            if (inst.region_of(s), v, p) not in pools:
                raise ModelError(f"no tanker pool ({inst.region_of(s)},{v},{p}) for source {s}")

    def time_capacity(self) -> None:
        inst, nt = self.inst, self.nt
        for r, v, p in self.rvp:
            vq = inst.vehicles[v].capacity_kl
            dl, rl = self._pool_legs(r, v, p)
            va = inst.availability.get((r, v, p), 0)
            for k in self.K:
                lvl = self.level(k)
                terms = []
                for s, c, _, _ in dl:
                    h = round_trip_hours(inst, (s, c), p, v, lvl)
                    terms.append((self.col("xCDistb", s, c, p, v), h / vq))
                for s, s2, _, _ in rl:
                    h = round_trip_hours(inst, (s, s2), p, v, lvl)
                    terms.append((self.col("xVSSupl", s, s2, p, v), h / vq))
                terms.append((self.col("xVExQ", r, v, p), -nt / vq))
                self.row("time_capacity", (r, v, p, k), terms, LE, nt * va)

    def tanker_flow(self) -> None:
        inst = self.inst
        for r, v, p in self.rvp:
            dl, rl = self._pool_legs(r, v, p)
            for k in self.K:
                lvl = self.level(k)
                trips = [("xPDL", leg, round_trip_slots(inst, (leg[0], leg[1]), p, v, lvl))
                         for leg in dl]
                trips += [("xRW", leg, round_trip_slots(inst, (leg[0], leg[1]), p, v, lvl))
                          for leg in rl]
                for t in inst.slots:
                    terms = [(self.col("xVQ", r, v, p, t, k), 1.0)]
                    if t == 1:
                        terms.append((self.col("xVQini", r, v, p), -1.0))
                    else:
                        terms.append((self.col("xVQ", r, v, p, t - 1, k), -1.0))
                    for fam, leg, rts in trips:
                        terms.append((self.col(fam, *leg, t, k), 1.0))
                        if t - rts >= 1:
                            terms.append((self.col(fam, *leg, t - rts, k), -1.0))
                    self.row("tanker_flow", (r, v, p, t, k), terms, EQ, 0.0)

    def tanker_initial(self) -> None:
        inst = self.inst
        for r, v, p in self.rvp:
            vq = inst.vehicles[v].capacity_kl
            self.row("tanker_initial", (r, v, p),
                     [(self.col("xVQini", r, v, p), 1.0), (self.col("xVExQ", r, v, p), -1.0)],
                     EQ, vq * inst.availability.get((r, v, p), 0))

    def objective(self) -> None:
        inst, m = self.inst, self.m
        for leg in self.legs:
            m.set_cost(self.col("xCDistb", *leg), inst.dist_cost.get(leg, 0.0), "distribution")
        for leg in self.rw_legs:
            m.set_cost(self.col("xVSSupl", *leg), inst.rw_cost.get(leg, 0.0), "rw_supply")
        for r, v, p in self.rvp:
            m.set_cost(self.col("xVExQ", r, v, p),
                       inst.extra_cost.get((v, p), 0.0) / inst.vehicles[v].capacity_kl,
                       "extra_tanker")
        for k in self.K:
            pk = self.prob[k]
            for key in self.inv:
                s, i, p = key
                spec = inst.inventory[key]
                for t in inst.slots:
                    if i == "RWI":
                        m.set_cost(self.col("xBCV", s, i, p, t, k), pk * spec.bcv_cost,
                                   "buffer_penalty")
                    elif spec.target_kl[t - 1] > 0:
                        m.set_cost(self.col("xTVp", s, i, p, t, k), pk * spec.tv_cost,
                                   "target_penalty")
                        m.set_cost(self.col("xTVm", s, i, p, t, k), pk * spec.tv_cost,
                                   "target_penalty")
            for (c, p) in inst.demand:
                if inst.products[p].kind != "final":
                    continue
                pen = inst.penalties[p]
                for t in inst.slots:
                    if self.has("dDemP", c, p, t, k):
                        m.set_cost(self.col("dDemP", c, p, t, k), pk * pen.surplus,
                                   "surplus_penalty")
                        m.set_cost(self.col("dDemM", c, p, t, k), pk * pen.shortfall,
                                   "shortfall_penalty")

    def build(self, variant: str) -> MilpModel:
        self._check_pools()
        self.columns()
        for fam in FAMILIES[:-1]:
            getattr(self, fam)()
        self.objective()
        self.m.metadata.update({
            "variant": variant,
            "instance": self.inst.name,
            "horizon_nt": self.nt,
            "scenarios": len(self.scen),
            "probabilities": self.prob,
            "congestion": [sc.congestion.value for sc in self.scen],
        })
        return self.m


def build_tsr(inst: Instance, scen: ScenarioSet) -> MilpModel:
    """Two-stage model over every scenario of ``scen``."""
    b = _Builder(inst, scen.scenarios, scen.probabilities, False, f"tsr:{inst.name}")
    return b.build("tsr")


def build_dt(inst: Instance, scen_k: Scenario | ScenarioSet) -> MilpModel:
    """Perfect-information model for one scenario (every column first stage, weight 1)."""
    if isinstance(scen_k, ScenarioSet):
        if len(scen_k) != 1:
            raise ModelError(f"build_dt needs exactly one scenario, got {len(scen_k)}")
        scen_k = scen_k[0]
    b = _Builder(inst, [scen_k], [1.0], True, f"dt:{inst.name}")
    return b.build("dt")


def first_stage_values(model: MilpModel, assignment: Mapping[str, float]) -> dict[str, float]:
    """Values of ``model``'s first-stage columns taken from ``assignment``."""
    out = {}
    for v in model.variables:
        if v.family in FIRST_STAGE:
            out[v.name] = float(assignment[v.name]) if v.name in assignment else math.nan
    return out


def fix_first_stage(model: MilpModel, values: Mapping[str, float]) -> MilpModel:
    """Append equality rows pinning every first-stage column to ``values``."""
    missing = [v.name for v in model.variables
               if v.family in FIRST_STAGE and v.name not in values]
    if missing:
        raise ModelError(f"first-stage fix lacks {len(missing)} columns, e.g. {missing[0]}")
    for j, v in enumerate(model.variables):
        if v.family not in FIRST_STAGE:
            continue
        val = min(max(float(values[v.name]), v.lb), v.ub)
        model.add_row("first_stage_fix", var_name("first_stage_fix", v.name), [(j, 1.0)], EQ, val)
    return model


def build_ev(inst: Instance, scen: ScenarioSet, first_stage_fix) -> MilpModel:
    """TSR model with the first stage pinned to ``first_stage_fix``.

    ``first_stage_fix`` is a :class:`~tankersched.solver.Solution` (or a plain
    name -> value mapping), normally the DT optimum on the mean scenario.
    """
    values = getattr(first_stage_fix, "assignment", first_stage_fix)
    model = build_tsr(inst, scen)
    model.name = f"ev:{inst.name}"
    model.metadata["variant"] = "ev"
    return fix_first_stage(model, values)


def parse_name(name: str) -> tuple[str, tuple[str, ...]]:
    """Split ``family(a,b,...)`` into its family and index strings."""
    fam, _, rest = name.partition("(")
    return fam, tuple(rest[:-1].split(",")) if rest else ()
