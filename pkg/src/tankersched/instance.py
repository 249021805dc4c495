"""Problem data model for tanker-based water distribution scheduling.

An :class:`Instance` holds every set, relation and parameter needed to build
the scheduling model. Instances are loaded from a JSON document (see
``docs/instance_schema.md``) and validated eagerly.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

SCHEMA_VERSION = 1

SOURCE_TYPES = ("FW", "GW", "TF")
INVENTORY_TYPES = ("RWI", "TWI")

# Slack used when rounding hour values up to whole slots.
_CEIL_EPS = 1e-9


class InstanceError(ValueError):
    """Raised when an instance document cannot be parsed."""


class LegError(KeyError):
    """Raised when a leg is not present in the relevant suitability relation."""


class CongestionLevel(enum.Enum):
    NOMINAL = "NOMINAL"
    HIGH = "HIGH"


@dataclass(frozen=True)
class Source:
    id: str
    type: str
    region: str
    smax_klph: float = 0.0
    throughput_klph: float = 0.0
    recovery: Mapping[str, float] = field(default_factory=dict)
    uptime_h: int = 1
    downtime_h: int = 1
    op_init: int = 0


@dataclass(frozen=True)
class Consumer:
    id: str
    region: str


@dataclass(frozen=True)
class Product:
    id: str
    kind: str  # "raw" or "final"
    tf_only: bool = False


@dataclass(frozen=True)
class Vehicle:
    id: str
    capacity_kl: float


@dataclass(frozen=True)
class InventorySpec:
    source: str
    inventory: str
    product: str
    min_kl: float
    max_kl: float
    buffer_kl: float
    initial_kl: float
    target_kl: tuple[float, ...]
    tv_cost: float = 0.0
    bcv_cost: float = 0.0


@dataclass(frozen=True)
class Penalty:
    surplus: float
    shortfall: float


# Defaults applied when an instance omits penalties for a final product.
DEFAULT_PENALTIES = {
    "DPW": Penalty(surplus=300.0, shortfall=3000.0),
    "UPDW": Penalty(surplus=100.0, shortfall=5000.0),
}


@dataclass(frozen=True)
class Instance:
    name: str
    horizon_nt: int
    regions: tuple[str, ...]
    products: Mapping[str, Product]
    sources: Mapping[str, Source]
    consumers: Mapping[str, Consumer]
    vehicles: Mapping[str, Vehicle]
    inventories: tuple[str, ...]
    sp: frozenset
    sc: frozenset
    ss: frozenset
    ssp: frozenset
    sspv: frozenset
    cpv: frozenset
    rs: frozenset
    rvp: frozenset
    sip: frozenset
    inventory: Mapping[tuple, InventorySpec]
    prep: Mapping[tuple, float]
    disinfection: Mapping[tuple, float]
    distribution: Mapping[str, float]
    travel: Mapping[tuple, float]
    rw_travel: Mapping[tuple, float]
    dist_cost: Mapping[tuple, float]
    rw_cost: Mapping[tuple, float]
    extra_cost: Mapping[tuple, float]
    penalties: Mapping[str, Penalty]
    availability: Mapping[tuple, int]
    demand: Mapping[tuple, tuple[float, ...]]
    congestion_multiplier: float = 1.3
    high_extra_hours: Mapping[tuple, float] = field(default_factory=dict)
    slot_bounds: tuple[tuple[float, float], ...] = ()
    demand_bounds: Mapping[str, Any] = field(default_factory=dict)
    # Dangling references found while loading; reported by validate_instance.
    load_issues: tuple[tuple[str, str], ...] = ()

    # ---- derived views -------------------------------------------------
    @property
    def raw_products(self) -> list[str]:
        return [p for p, prod in self.products.items() if prod.kind == "raw"]

    @property
    def final_products(self) -> list[str]:
        return [p for p, prod in self.products.items() if prod.kind == "final"]

    def sources_of_type(self, kind: str) -> list[str]:
        return [s for s, src in self.sources.items() if src.type == kind]

    @property
    def tf_sources(self) -> list[str]:
        return self.sources_of_type("TF")

    def region_of(self, s: str) -> str:
        regions = sorted(r for (r, s2) in self.rs if s2 == s)
        if regions:
            return regions[0]
        return self.sources[s].region

    @property
    def slots(self) -> range:
        return range(1, self.horizon_nt + 1)

    def delivery_legs(self) -> list[tuple[str, str, str, str]]:
        """All (s, c, p, v) tuples a tanker may serve, in canonical order."""
        legs = []
        for s in self.sources:
            for c in self.consumers:
                if (s, c) not in self.sc:
                    continue
                for p in self.final_products:
                    if (s, p) not in self.sp:
                        continue
                    for v in self.vehicles:
                        if (c, p, v) in self.cpv:
                            legs.append((s, c, p, v))
        return legs

    def delivery_routes(self) -> list[tuple[str, str, str]]:
        seen = []
        for s, c, p, _ in self.delivery_legs():
            if (s, c, p) not in seen:
                seen.append((s, c, p))
        return seen

    def rw_legs(self) -> list[tuple[str, str, str, str]]:
        """All (s, s', p, v) raw-water supply tuples in canonical order."""
        legs = []
        for s in self.sources:
            for s2 in self.sources:
                if (s, s2) not in self.ss:
                    continue
                for p in self.raw_products:
                    if (s, p) not in self.sp or (s, s2, p) not in self.ssp:
                        continue
                    for v in self.vehicles:
                        if (s, s2, p, v) in self.sspv:
                            legs.append((s, s2, p, v))
        return legs

    def rw_routes(self) -> list[tuple[str, str, str]]:
        seen = []
        for s, s2, p, _ in self.rw_legs():
            if (s, s2, p) not in seen:
                seen.append((s, s2, p))
        return seen

    def demand_cells(self) -> list[tuple[str, str]]:
        return [cp for cp, prof in self.demand.items() if any(x > 0 for x in prof)]

    def multiplier(self, level: CongestionLevel) -> float:
        return self.congestion_multiplier if level is CongestionLevel.HIGH else 1.0

    def with_penalties(self, penalties: Mapping[str, Penalty]) -> "Instance":
        merged = dict(self.penalties)
        merged.update(penalties)
        return _replace(self, penalties=merged)


def _replace(inst: Instance, **changes) -> Instance:
    import dataclasses

    return dataclasses.replace(inst, **changes)


# ---------------------------------------------------------------------------
# Time helpers
# ---------------------------------------------------------------------------


def ceil_slots(hours: float) -> int:
    """Round an hour value up to whole slots, never below one slot."""
    return max(1, math.ceil(hours - _CEIL_EPS))


def _travel_component(inst: Instance, origin: str, dest: str, base: float,
                      level: CongestionLevel) -> float:
    if level is CongestionLevel.HIGH and (origin, dest) in inst.high_extra_hours:
        return base + inst.high_extra_hours[(origin, dest)]
    return base * inst.multiplier(level)


def _leg_kind(inst: Instance, leg: tuple[str, str]) -> str:
    origin, dest = leg
    if dest in inst.consumers:
        return "consumer"
    if dest in inst.sources and inst.sources[dest].type == "TF":
        return "tf"
    raise LegError(f"unknown leg destination {dest!r} for leg {origin}->{dest}")


def transit_hours(inst: Instance, leg: tuple[str, str], p: str, v: str,
                  level: CongestionLevel = CongestionLevel.NOMINAL) -> int:
    """One-way dispatch-to-arrival time of a leg in whole slots.

    Source to consumer: travel (congestion scaled) plus preparation plus
    on-tanker disinfection for freshwater sources. Source to treatment
    facility: travel plus preparation.
    """
    s, dest = leg
    kind = _leg_kind(inst, leg)
    if kind == "consumer":
        key = (s, dest, p, v)
        if key not in inst.travel:
            raise LegError(f"no delivery suitability/travel entry for {key}")
        hours = _travel_component(inst, s, dest, inst.travel[key], level)
        hours += inst.prep.get((s, v), 0.0)
        if inst.sources[s].type == "FW":
            hours += inst.disinfection.get((s, v), 0.0)
    else:
        key = (s, dest, p, v)
        if key not in inst.rw_travel:
            raise LegError(f"no raw-supply suitability/travel entry for {key}")
        hours = _travel_component(inst, s, dest, inst.rw_travel[key], level)
        hours += inst.prep.get((s, v), 0.0)
    return ceil_slots(hours)


def round_trip_hours(inst: Instance, leg: tuple[str, str], p: str, v: str,
                     level: CongestionLevel = CongestionLevel.NOMINAL) -> float:
    """Tanker busy time of one trip in (unrounded) hours."""
    s, dest = leg
    kind = _leg_kind(inst, leg)
    if kind == "consumer":
        key = (s, dest, p, v)
        if key not in inst.travel:
            raise LegError(f"no delivery suitability/travel entry for {key}")
        hours = 2.0 * _travel_component(inst, s, dest, inst.travel[key], level)
        hours += inst.prep.get((s, v), 0.0) + inst.disinfection.get((s, v), 0.0)
        hours += inst.distribution.get(dest, 0.0)
    else:
        key = (s, dest, p, v)
        if key not in inst.rw_travel:
            raise LegError(f"no raw-supply suitability/travel entry for {key}")
        hours = 2.0 * _travel_component(inst, s, dest, inst.rw_travel[key], level)
        hours += inst.prep.get((s, v), 0.0)
    return hours


def round_trip_slots(inst: Instance, leg: tuple[str, str], p: str, v: str,
                     level: CongestionLevel = CongestionLevel.NOMINAL) -> int:
    return ceil_slots(round_trip_hours(inst, leg, p, v, level))


def route_transit(inst: Instance, leg: tuple[str, str], p: str,
                  level: CongestionLevel = CongestionLevel.NOMINAL) -> int:
    """Vehicle-independent arrival lag of a route: the slowest compatible vehicle."""
    s, dest = leg
    if _leg_kind(inst, leg) == "consumer":
        vehicles = [v for v in inst.vehicles if (s, dest, p, v) in inst.travel
                    and (dest, p, v) in inst.cpv]
    else:
        vehicles = [v for v in inst.vehicles if (s, dest, p, v) in inst.sspv]
    if not vehicles:
        raise LegError(f"no compatible vehicle for route {s}->{dest} ({p})")
    return max(transit_hours(inst, leg, p, v, level) for v in vehicles)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __len__(self) -> int:
        return len(self.errors)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [{"path": v.path, "message": v.message} for v in self.errors],
            "warnings": [{"path": v.path, "message": v.message} for v in self.warnings],
        }

    def format(self) -> str:
        lines = []
        for v in self.errors:
            lines.append(f"ERROR   {v.path}: {v.message}")
        for v in self.warnings:
            lines.append(f"WARNING {v.path}: {v.message}")
        if not lines:
            lines.append("OK")
        return "\n".join(lines)


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every structural and numerical invariant of an instance."""
    rep = ValidationReport()
    err = lambda path, msg: rep.errors.append(Violation(path, msg))  # noqa: E731
    warn = lambda path, msg: rep.warnings.append(Violation(path, msg))  # noqa: E731

    for path, msg in inst.load_issues:
        err(path, msg)

    nt = inst.horizon_nt
    if nt < 1:
        err("horizon_nt", "horizon must contain at least one slot")

    for p, prod in inst.products.items():
        if prod.kind not in ("raw", "final"):
            err(f"products.{p}.kind", f"unknown product kind {prod.kind!r}")
    for s, src in inst.sources.items():
        if src.type not in SOURCE_TYPES:
            err(f"sources.{s}.type", f"unknown source type {src.type!r}")
        if src.region not in inst.regions:
            err(f"sources.{s}.region", f"unknown region {src.region!r}")
        if src.type == "GW" and not src.smax_klph > 0:
            err(f"sources.{s}.smax_klph", "groundwater source needs a positive extraction limit")
        if src.type == "TF":
            if not src.throughput_klph > 0:
                err(f"sources.{s}.throughput_klph", "treatment facility needs positive throughput")
            for p in inst.final_products:
                if (s, p) in inst.sp:
                    beta = src.recovery.get(p)
                    if beta is None or not (0.0 < beta <= 1.0):
                        err(f"sources.{s}.recovery.{p}", "recovery fraction must lie in (0, 1]")
            if src.op_init not in (0, 1):
                err(f"sources.{s}.op_init", "initial operating state must be 0 or 1")
            if src.uptime_h < 1 or src.downtime_h < 1:
                err(f"sources.{s}", "uptime and downtime must be at least one slot")
        for p in inst.products:
            if (s, p) not in inst.sp:
                continue
            kind = inst.products[p].kind
            if src.type == "GW" and kind != "raw":
                err(f"suitability.SP[{s},{p}]", "groundwater sources supply raw water only")
            if src.type == "TF" and kind == "raw":
                err(f"suitability.SP[{s},{p}]", "treatment facilities supply final products only")
            if inst.products[p].tf_only and src.type != "TF":
                err(f"suitability.SP[{s},{p}]",
                    f"product {p} is deliverable only from treatment facilities")
        regions = [r for (r, s2) in inst.rs if s2 == s]
        if len(regions) != 1:
            err(f"suitability.RS[*,{s}]", "source must belong to exactly one region")
    for c, con in inst.consumers.items():
        if con.region not in inst.regions:
            err(f"consumers.{c}.region", f"unknown region {con.region!r}")
    for v, veh in inst.vehicles.items():
        if not veh.capacity_kl > 0:
            err(f"vehicles.{v}.capacity_kl", "vehicle capacity must be positive")

    # slots
    if inst.slot_bounds:
        if len(inst.slot_bounds) != nt:
            err("slot_bounds", f"expected {nt} slots, got {len(inst.slot_bounds)}")
        prev_end = None
        for t, (ts, te) in enumerate(inst.slot_bounds, start=1):
            if abs(te - ts - 1.0) > 1e-9:
                err(f"slot_bounds[{t}]", "slots must be one hour long")
            if prev_end is not None and abs(ts - prev_end) > 1e-9:
                err(f"slot_bounds[{t}]", "slots must be contiguous")
            prev_end = te

    # inventories
    for key, spec in inst.inventory.items():
        s, i, p = key
        path = f"inventory[{s},{i},{p}]"
        if (s, i, p) not in inst.sip:
            err(path, "inventory record without SIP suitability")
        if not spec.min_kl <= spec.max_kl:
            err(path, "ICap min exceeds max")
        if i == "RWI" and not (spec.min_kl <= spec.buffer_kl <= spec.max_kl):
            err(path, "buffer capacity must lie within [min, max]")
        if len(spec.target_kl) != nt:
            err(path, f"target profile must have {nt} entries")
        for t, tgt in enumerate(spec.target_kl, start=1):
            if tgt > 0 and not (spec.min_kl <= tgt <= spec.max_kl):
                err(f"{path}.target[{t}]", "target capacity must lie within [min, max]")
                break
        if not (spec.min_kl <= spec.initial_kl <= spec.max_kl):
            err(path, "initial quantity must lie within [min, max]")
    for s, i, p in inst.sip:
        if (s, i, p) not in inst.inventory:
            err(f"suitability.SIP[{s},{i},{p}]", "SIP entry without inventory record")

    # demand reachability
    for (c, p), prof in inst.demand.items():
        path = f"demand[{c},{p}]"
        if len(prof) != nt:
            err(path, f"demand profile must have {nt} entries")
        if any(x < 0 for x in prof):
            err(path, "demand must be non-negative")
        if not any(x > 0 for x in prof):
            continue
        if inst.products[p].kind != "final":
            err(path, "only final products can be demanded")
            continue
        routes = [s for s in inst.sources if (s, p) in inst.sp and (s, c) in inst.sc
                  and (not inst.products[p].tf_only or inst.sources[s].type == "TF")]
        if not routes:
            err(path, f"no source can supply {p} to {c}")
        if not any((c, p, v) in inst.cpv for v in inst.vehicles):
            err(path, f"no vehicle is compatible with delivering {p} to {c}")

    # per-leg data
    for s, c, p, v in inst.delivery_legs():
        path = f"leg[{s}->{c},{p},{v}]"
        if (s, c, p, v) not in inst.travel:
            err(path, "missing travel time")
        if (s, c, p, v) not in inst.dist_cost:
            err(path, "missing distribution cost")
        if (inst.region_of(s), v, p) not in inst.rvp:
            err(path, "vehicle not available for this product in the source region")
    for s, s2, p, v in inst.rw_legs():
        path = f"rwleg[{s}->{s2},{p},{v}]"
        if (s, s2, p, v) not in inst.rw_travel:
            err(path, "missing raw-supply travel time")
        if (s, s2, p, v) not in inst.rw_cost:
            err(path, "missing raw-supply cost")
        if (inst.region_of(s), v, p) not in inst.rvp:
            err(path, "vehicle not available for this product in the source region")
        if inst.sources[s2].type != "TF":
            err(path, "raw water must be supplied to a treatment facility")
    for s in inst.tf_sources:
        for p in inst.raw_products:
            if (s, "RWI", p) in inst.sip and not any(k[1] == s for k in inst.rw_routes()):
                warn(f"sources.{s}", "treatment facility receives no raw-water supply")
    for key in inst.availability:
        if key not in inst.rvp:
            err(f"tanker_availability[{','.join(key)}]", "availability without RVP entry")
        elif inst.availability[key] < 0:
            err(f"tanker_availability[{','.join(key)}]", "availability must be non-negative")
    for p in inst.final_products:
        if p not in inst.penalties:
            err(f"costs.penalties.{p}", "no surplus/shortfall penalty for final product")
    if inst.congestion_multiplier < 1.0:
        err("congestion_multiplier", "congestion multiplier must be >= 1")
    for key, extra in inst.high_extra_hours.items():
        if extra < 0:
            err(f"congestion_overrides[{key[0]}->{key[1]}]", "extra hours must be >= 0")

    if inst.demand_bounds:
        warn("demand_bounds", "minimum/maximum demand bounds are accepted but not used by the model")
    return rep


# ---------------------------------------------------------------------------
# Loading and dumping
# ---------------------------------------------------------------------------


def _profile(value: Any, nt: int, path: str) -> tuple[float, ...]:
    if value is None:
        return (0.0,) * nt
    if isinstance(value, (int, float)):
        return (float(value),) * nt
    if isinstance(value, dict):
        prof = [0.0] * nt
        for t, x in value.items():
            prof[int(t) - 1] = float(x)
        return tuple(prof)
    if isinstance(value, list):
        return tuple(float(x) for x in value)
    raise InstanceError(f"{path}: cannot interpret profile {value!r}")


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    """Build an :class:`Instance` from a parsed document.

    Dangling identifiers are not dropped: they are recorded and surface as
    validation errors.
    """
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InstanceError(f"unsupported schema_version {doc.get('schema_version')!r}")
    try:
        nt = int(doc["horizon_nt"])
        regions = tuple(doc["regions"])
        products = {d["id"]: Product(d["id"], d["kind"], bool(d.get("tf_only", False)))
                    for d in doc["products"]}
        vehicles = {d["id"]: Vehicle(d["id"], float(d["capacity_kl"])) for d in doc["vehicles"]}
        consumers = {d["id"]: Consumer(d["id"], d["region"]) for d in doc["consumers"]}
        sources = {}
        for d in doc["sources"]:
            sources[d["id"]] = Source(
                id=d["id"], type=d["type"], region=d["region"],
                smax_klph=float(d.get("smax_klph", 0.0)),
                throughput_klph=float(d.get("throughput_klph", 0.0)),
                recovery={k: float(x) for k, x in d.get("recovery", {}).items()},
                uptime_h=int(d.get("uptime_h", 1)),
                downtime_h=int(d.get("downtime_h", 1)),
                op_init=int(d.get("op_init", 0)),
            )
    except KeyError as exc:
        raise InstanceError(f"missing required field {exc}") from exc
    inventories = tuple(doc.get("inventories", INVENTORY_TYPES))

    issues: list[tuple[str, str]] = []
    known = {
        "r": set(regions), "s": set(sources), "c": set(consumers),
        "p": set(products), "v": set(vehicles), "i": set(inventories),
    }

    def check(path: str, row: Iterable[str], sig: str) -> bool:
        row = list(row)
        ok = True
        for kind, ident in zip(sig, row):
            if ident not in known[kind]:
                issues.append((path, f"unknown identifier {ident!r}"))
                ok = False
        return ok

    suit = doc.get("suitability", {})
    sigs = {"SP": "sp", "SC": "sc", "SS": "ss", "SSP": "ssp", "SSPV": "sspv",
            "CPV": "cpv", "RS": "rs", "RVP": "rvp", "SIP": "sip"}
    rels: dict[str, frozenset] = {}
    for name, sig in sigs.items():
        rows = suit.get(name, [])
        if name == "RS" and not rows:
            rows = [[src.region, s] for s, src in sources.items()]
        good = []
        for n, row in enumerate(rows):
            if len(row) != len(sig):
                issues.append((f"suitability.{name}[{n}]", f"expected {len(sig)} fields"))
            elif check(f"suitability.{name}[{n}]", row, sig):
                good.append(tuple(row))
        rels[name.lower()] = frozenset(good)

    def keyed(section: str, rows: list, sig: str, cast=float) -> dict:
        out = {}
        for n, row in enumerate(rows):
            *key, value = row
            if len(key) != len(sig):
                issues.append((f"{section}[{n}]", f"expected {len(sig)} key fields"))
                continue
            if check(f"{section}[{n}]", key, sig):
                out[tuple(key) if len(key) > 1 else key[0]] = cast(value)
        return out

    times = doc.get("times", {})
    costs = doc.get("costs", {})
    prep = keyed("times.prep", times.get("prep", []), "sv")
    disinfection = keyed("times.disinfection", times.get("disinfection", []), "sv")
    distribution = keyed("times.distribution", times.get("distribution", []), "c")
    travel = keyed("times.travel", times.get("travel", []), "scpv")
    rw_travel = keyed("times.rw_travel", times.get("rw_travel", []), "sspv")
    dist_cost = keyed("costs.distribution", costs.get("distribution", []), "scpv")
    rw_cost = keyed("costs.rw_supply", costs.get("rw_supply", []), "sspv")
    extra_cost = keyed("costs.extra_tanker", costs.get("extra_tanker", []), "vp")
    availability = keyed("tanker_availability", doc.get("tanker_availability", []), "rvp", int)

    penalties = {}
    for p in products:
        if products[p].kind == "final" and p in DEFAULT_PENALTIES:
            penalties[p] = DEFAULT_PENALTIES[p]
    for p, d in costs.get("penalties", {}).items():
        if p not in products:
            issues.append((f"costs.penalties.{p}", f"unknown identifier {p!r}"))
            continue
        penalties[p] = Penalty(float(d["surplus"]), float(d["shortfall"]))

    inventory = {}
    for n, d in enumerate(doc.get("inventory", [])):
        key = (d["source"], d["inventory"], d["product"])
        if not check(f"inventory[{n}]", key, "sip"):
            continue
        inventory[key] = InventorySpec(
            source=key[0], inventory=key[1], product=key[2],
            min_kl=float(d.get("min", 0.0)), max_kl=float(d["max"]),
            buffer_kl=float(d.get("buffer", 0.0)),
            initial_kl=float(d.get("initial", 0.0)),
            target_kl=_profile(d.get("target"), nt, f"inventory[{n}].target"),
            tv_cost=float(d.get("tv_cost", 0.0)),
            bcv_cost=float(d.get("bcv_cost", 0.0)),
        )

    demand = {}
    for n, d in enumerate(doc.get("demand", [])):
        key = (d["consumer"], d["product"])
        if check(f"demand[{n}]", key, "cp"):
            demand[key] = _profile(d.get("profile"), nt, f"demand[{n}].profile")

    overrides = {}
    for n, row in enumerate(doc.get("congestion_overrides", [])):
        origin, dest, extra = row
        if origin not in sources or (dest not in consumers and dest not in sources):
            issues.append((f"congestion_overrides[{n}]", "unknown leg endpoint"))
            continue
        overrides[(origin, dest)] = float(extra)

    slot_bounds = tuple(tuple(float(x) for x in b) for b in doc.get("slot_bounds", []))
    if not slot_bounds:
        slot_bounds = tuple((float(t - 1), float(t)) for t in range(1, nt + 1))

    return Instance(
        name=str(doc.get("name", "instance")),
        horizon_nt=nt, regions=regions, products=products, sources=sources,
        consumers=consumers, vehicles=vehicles, inventories=inventories,
        inventory=inventory, prep=prep, disinfection=disinfection,
        distribution=distribution, travel=travel, rw_travel=rw_travel,
        dist_cost=dist_cost, rw_cost=rw_cost, extra_cost=extra_cost,
        penalties=penalties, availability=availability, demand=demand,
        congestion_multiplier=float(doc.get("congestion_multiplier", 1.3)),
        high_extra_hours=overrides, slot_bounds=slot_bounds,
        demand_bounds=dict(doc.get("demand_bounds", {})),
        load_issues=tuple(issues),
        **rels,
    )


def instance_to_dict(inst: Instance) -> dict:
    def rows(mapping: Mapping) -> list:
        out = []
        for key in sorted(mapping):
            k = list(key) if isinstance(key, tuple) else [key]
            out.append(k + [mapping[key]])
        return out

    return {
        "schema_version": SCHEMA_VERSION,
        "name": inst.name,
        "horizon_nt": inst.horizon_nt,
        "congestion_multiplier": inst.congestion_multiplier,
        "regions": list(inst.regions),
        "products": [{"id": p.id, "kind": p.kind, "tf_only": p.tf_only}
                     for p in inst.products.values()],
        "inventories": list(inst.inventories),
        "vehicles": [{"id": v.id, "capacity_kl": v.capacity_kl} for v in inst.vehicles.values()],
        "sources": [
            {"id": s.id, "type": s.type, "region": s.region, "smax_klph": s.smax_klph,
             "throughput_klph": s.throughput_klph, "recovery": dict(s.recovery),
             "uptime_h": s.uptime_h, "downtime_h": s.downtime_h, "op_init": s.op_init}
            for s in inst.sources.values()
        ],
        "consumers": [{"id": c.id, "region": c.region} for c in inst.consumers.values()],
        "suitability": {
            name.upper(): sorted(list(x) for x in getattr(inst, name))
            for name in ("sp", "sc", "ss", "ssp", "sspv", "cpv", "rs", "rvp", "sip")
        },
        "inventory": [
            {"source": sp.source, "inventory": sp.inventory, "product": sp.product,
             "min": sp.min_kl, "max": sp.max_kl, "buffer": sp.buffer_kl,
             "initial": sp.initial_kl, "target": list(sp.target_kl),
             "tv_cost": sp.tv_cost, "bcv_cost": sp.bcv_cost}
            for _, sp in sorted(inst.inventory.items())
        ],
        "times": {
            "prep": rows(inst.prep), "disinfection": rows(inst.disinfection),
            "distribution": rows(inst.distribution), "travel": rows(inst.travel),
            "rw_travel": rows(inst.rw_travel),
        },
        "costs": {
            "distribution": rows(inst.dist_cost), "rw_supply": rows(inst.rw_cost),
            "extra_tanker": rows(inst.extra_cost),
            "penalties": {p: {"surplus": x.surplus, "shortfall": x.shortfall}
                          for p, x in sorted(inst.penalties.items())},
        },
        "tanker_availability": rows(inst.availability),
        "demand": [{"consumer": c, "product": p, "profile": list(prof)}
                   for (c, p), prof in sorted(inst.demand.items())],
        "congestion_overrides": [[o, d, h] for (o, d), h in sorted(inst.high_extra_hours.items())],
        **({"demand_bounds": dict(inst.demand_bounds)} if inst.demand_bounds else {}),
    }


def load_instance(path: str | Path) -> Instance:
    """Read an instance document; parse errors carry the offending line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: cannot read: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InstanceError(f"{path}: line 1: top-level document must be an object")
    return instance_from_dict(doc)


def dump_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")
