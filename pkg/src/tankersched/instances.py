"""Bundled instances: the six-slot toy, a random generator of its scale, and
the three-region reference case."""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .instance import Instance, instance_from_dict, load_instance


def tiny_instance_dict(nt: int = 6) -> dict:
    """One region, one source of each type, one consumer, one vehicle type."""
    demand_dpw = [0.0] * nt
    demand_updw = [0.0] * nt
    demand_dpw[3] = 6.0
    demand_dpw[5] = 4.0
    demand_updw[4] = 3.0
    return {
        "schema_version": 1,
        "name": "T6",
        "horizon_nt": nt,
        "regions": ["R1"],
        "products": [
            {"id": "RW", "kind": "raw"},
            {"id": "DPW", "kind": "final"},
            {"id": "UPDW", "kind": "final", "tf_only": True},
        ],
        "vehicles": [{"id": "V1", "capacity_kl": 5.0}],
        "sources": [
            {"id": "GW1", "type": "GW", "region": "R1", "smax_klph": 5.0},
            {"id": "FW1", "type": "FW", "region": "R1"},
            {"id": "TF1", "type": "TF", "region": "R1", "throughput_klph": 4.0,
             "recovery": {"DPW": 0.8, "UPDW": 0.5}, "uptime_h": 2, "downtime_h": 1,
             "op_init": 0},
        ],
        "consumers": [{"id": "C1", "region": "R1"}],
        "suitability": {
            "SP": [["GW1", "RW"], ["FW1", "DPW"], ["TF1", "DPW"], ["TF1", "UPDW"]],
            "SC": [["FW1", "C1"], ["TF1", "C1"]],
            "SS": [["GW1", "TF1"]],
            "SSP": [["GW1", "TF1", "RW"]],
            "SSPV": [["GW1", "TF1", "RW", "V1"]],
            "CPV": [["C1", "DPW", "V1"], ["C1", "UPDW", "V1"]],
            "RVP": [["R1", "V1", "RW"], ["R1", "V1", "DPW"], ["R1", "V1", "UPDW"]],
            "SIP": [["TF1", "RWI", "RW"], ["TF1", "TWI", "DPW"], ["TF1", "TWI", "UPDW"]],
        },
        "inventory": [
            {"source": "TF1", "inventory": "RWI", "product": "RW", "min": 0.0, "max": 40.0,
             "buffer": 5.0, "initial": 10.0, "bcv_cost": 2.0},
            {"source": "TF1", "inventory": "TWI", "product": "DPW", "min": 0.0, "max": 20.0,
             "initial": 4.0, "target": 4.0, "tv_cost": 1.0},
            {"source": "TF1", "inventory": "TWI", "product": "UPDW", "min": 0.0, "max": 20.0,
             "initial": 2.0, "target": 0.0, "tv_cost": 1.0},
        ],
        "times": {
            "prep": [["GW1", "V1", 0.5], ["FW1", "V1", 0.5], ["TF1", "V1", 0.5]],
            "disinfection": [["FW1", "V1", 0.5]],
            "distribution": [["C1", 0.5]],
            "travel": [["FW1", "C1", "DPW", "V1", 1.5], ["TF1", "C1", "DPW", "V1", 1.0],
                       ["TF1", "C1", "UPDW", "V1", 1.0]],
            "rw_travel": [["GW1", "TF1", "RW", "V1", 1.0]],
        },
        "costs": {
            "distribution": [["FW1", "C1", "DPW", "V1", 15.0], ["TF1", "C1", "DPW", "V1", 10.0],
                             ["TF1", "C1", "UPDW", "V1", 12.0]],
            "rw_supply": [["GW1", "TF1", "RW", "V1", 5.0]],
            "extra_tanker": [["V1", "RW", 50.0], ["V1", "DPW", 50.0], ["V1", "UPDW", 50.0]],
        },
        "tanker_availability": [["R1", "V1", "RW", 1], ["R1", "V1", "DPW", 1],
                                ["R1", "V1", "UPDW", 1]],
        "demand": [
            {"consumer": "C1", "product": "DPW", "profile": demand_dpw},
            {"consumer": "C1", "product": "UPDW", "profile": demand_updw},
        ],
    }


def tiny_instance() -> Instance:
    return instance_from_dict(tiny_instance_dict())


def random_small_instance(seed: int, nt: int = 6) -> Instance:
    """T6-shaped instance with randomised demand, costs, times and stocks."""
    rng = np.random.default_rng(seed)
    doc = tiny_instance_dict(nt)
    slots = sorted(rng.choice(np.arange(2, nt), size=3, replace=False).tolist())
    dpw = [0.0] * nt
    updw = [0.0] * nt
    for t in slots[:2]:
        dpw[t] = float(rng.integers(2, 9))
    updw[slots[2]] = float(rng.integers(1, 5))
    doc["name"] = f"rand{seed}"
    doc["demand"][0]["profile"] = dpw
    doc["demand"][1]["profile"] = updw
    tf = doc["sources"][2]
    tf["throughput_klph"] = float(rng.integers(2, 7))
    tf["uptime_h"] = int(rng.integers(1, 4))
    tf["downtime_h"] = int(rng.integers(1, 3))
    tf["op_init"] = int(rng.integers(0, 2))
    doc["sources"][0]["smax_klph"] = float(rng.integers(2, 8))
    inv = doc["inventory"]
    inv[0]["initial"] = float(rng.integers(0, 20))
    inv[1]["initial"] = float(rng.integers(0, 8))
    inv[1]["target"] = float(rng.integers(0, 6))
    inv[2]["initial"] = float(rng.integers(0, 4))
    times = doc["times"]
    times["travel"] = [[*row[:4], round(float(rng.uniform(0.3, 2.0)), 2)]
                       for row in times["travel"]]
    times["rw_travel"][0][4] = round(float(rng.uniform(0.3, 2.0)), 2)
    costs = doc["costs"]
    costs["distribution"] = [[*row[:4], float(rng.integers(5, 25))] for row in costs["distribution"]]
    costs["extra_tanker"] = [[*row[:2], float(rng.integers(20, 200))]
                             for row in costs["extra_tanker"]]
    doc["vehicles"][0]["capacity_kl"] = float(rng.choice([4.0, 5.0, 6.0]))
    return instance_from_dict(doc)


def reference_instance_dict() -> dict:
    ref = resources.files("tankersched").joinpath("data/reference_instance.json")
    return json.loads(ref.read_text())


def reference_instance() -> Instance:
    with resources.as_file(resources.files("tankersched").joinpath(
            "data/reference_instance.json")) as path:
        return load_instance(path)


# Hour-of-day demand shape (index 0 = 00:00-01:00), mean 1 over a day.
_DIURNAL = np.array([0.35, 0.3, 0.3, 0.3, 0.4, 0.7, 1.3, 1.8, 1.9, 1.6, 1.2, 1.0,
                     1.0, 1.0, 0.9, 0.9, 1.0, 1.3, 1.6, 1.7, 1.4, 1.0, 0.6, 0.45])


def build_reference_instance_dict(days: int = 5) -> dict:
    """Three-region case: GW1/TF1, FW2/TF2, FW3/GW3 with six consumer groups.

    Hand-set synthetic data of realistic scale. Near routes keep their slot
    count under congestion while far routes slip by a slot, so congestion
    visibly favours near sources.
    """
    nt = 24 * days
    prof = np.tile(_DIURNAL / _DIURNAL.mean(), days)
    mean_rate = {  # kiloliters per hour, daily average
        ("HHC1", "DPW"): 6.0, ("HHC1", "UPDW"): 1.0, ("CC1", "DPW"): 4.0,
        ("CC2", "DPW"): 5.0, ("HC2", "UPDW"): 1.5,
        ("HHC3", "DPW"): 6.0, ("HHC3", "UPDW"): 1.0, ("HC3", "UPDW"): 1.5,
    }
    # (source, consumer, product) -> one-way travel hours, cost per kiloliter
    routes = {
        ("TF1", "HHC1", "DPW"): (1.0, 250.0), ("FW2", "HHC1", "DPW"): (3.0, 400.0),
        ("TF1", "CC1", "DPW"): (0.8, 240.0), ("FW2", "CC1", "DPW"): (2.8, 390.0),
        ("FW2", "CC2", "DPW"): (1.2, 330.0), ("FW3", "CC2", "DPW"): (2.9, 380.0),
        ("FW3", "HHC3", "DPW"): (1.0, 340.0), ("FW2", "HHC3", "DPW"): (2.9, 390.0),
        ("TF2", "HHC1", "UPDW"): (2.8, 330.0), ("TF2", "HC2", "UPDW"): (0.9, 280.0),
        ("TF2", "HHC3", "UPDW"): (2.9, 340.0), ("TF2", "HC3", "UPDW"): (3.1, 350.0),
    }
    vehicle_for = {"RW": "T10", "DPW": "T10", "UPDW": "T6"}
    rw_routes = {("GW1", "TF1"): (1.2, 20.0), ("GW3", "TF2"): (2.6, 30.0)}
    region = {"GW1": "R1", "TF1": "R1", "FW2": "R2", "TF2": "R2", "FW3": "R3", "GW3": "R3",
              "HHC1": "R1", "CC1": "R1", "CC2": "R2", "HC2": "R2", "HHC3": "R3", "HC3": "R3"}
    sources = [
        {"id": "GW1", "type": "GW", "region": "R1", "smax_klph": 25.0},
        {"id": "TF1", "type": "TF", "region": "R1", "throughput_klph": 10.0,
         "recovery": {"DPW": 0.8}, "uptime_h": 4, "downtime_h": 2, "op_init": 1},
        {"id": "FW2", "type": "FW", "region": "R2"},
        {"id": "TF2", "type": "TF", "region": "R2", "throughput_klph": 5.0,
         "recovery": {"UPDW": 0.5}, "uptime_h": 4, "downtime_h": 2, "op_init": 1},
        {"id": "FW3", "type": "FW", "region": "R3"},
        {"id": "GW3", "type": "GW", "region": "R3", "smax_klph": 25.0},
    ]
    consumers = [{"id": c, "region": region[c]} for c in ("HHC1", "CC1", "CC2", "HC2", "HHC3", "HC3")]

    def target_profile(level: float) -> list[float]:
        return [level if t % 24 == 0 else 0.0 for t in range(1, nt + 1)]

    inventory = []
    for tf, rw_init, p, lo, hi, level in (("TF1", 120.0, "DPW", 5.0, 200.0, 60.0),
                                          ("TF2", 100.0, "UPDW", 2.0, 80.0, 25.0)):
        inventory.append({"source": tf, "inventory": "RWI", "product": "RW", "min": 10.0,
                          "max": 400.0, "buffer": 60.0, "initial": rw_init, "bcv_cost": 2.0})
        inventory.append({"source": tf, "inventory": "TWI", "product": p, "min": lo,
                          "max": hi, "initial": level, "target": target_profile(level),
                          "tv_cost": 20.0})

    sp = [["GW1", "RW"], ["GW3", "RW"], ["TF1", "DPW"], ["TF2", "UPDW"], ["FW2", "DPW"],
          ["FW3", "DPW"]]
    sc = sorted({(s, c) for s, c, _ in routes})
    cpv = sorted({(c, p, vehicle_for[p]) for (c, p) in mean_rate})
    rvp = sorted({(region[s], vehicle_for[p], p) for s, _, p in routes}
                 | {(region[s], "T10", "RW") for s, _ in rw_routes})
    availability = {("R1", "T10", "DPW"): 2, ("R1", "T10", "RW"): 2,
                    ("R2", "T10", "DPW"): 2, ("R2", "T6", "UPDW"): 1, ("R3", "T10", "DPW"): 2,
                    ("R3", "T10", "RW"): 2}
    prep = [[s["id"], v, 0.5] for s in sources for v in ("T6", "T10")]
    return {
        "schema_version": 1,
        "name": "reference-3region",
        "horizon_nt": nt,
        "regions": ["R1", "R2", "R3"],
        "products": [
            {"id": "RW", "kind": "raw"},
            {"id": "DPW", "kind": "final"},
            {"id": "UPDW", "kind": "final", "tf_only": True},
        ],
        "vehicles": [{"id": "T6", "capacity_kl": 6.0}, {"id": "T10", "capacity_kl": 10.0}],
        "sources": sources,
        "consumers": consumers,
        "suitability": {
            "SP": sp,
            "SC": [list(x) for x in sc],
            "SS": [list(k) for k in rw_routes],
            "SSP": [[a, b, "RW"] for a, b in rw_routes],
            "SSPV": [[a, b, "RW", "T10"] for a, b in rw_routes],
            "CPV": [list(x) for x in cpv],
            "RS": [[s["region"], s["id"]] for s in sources],
            "RVP": [list(x) for x in rvp],
            "SIP": [[d["source"], d["inventory"], d["product"]] for d in inventory],
        },
        "inventory": inventory,
        "times": {
            "prep": prep,
            "disinfection": [[s, v, 0.5] for s in ("FW2", "FW3") for v in ("T6", "T10")],
            "distribution": [[c["id"], 0.5] for c in consumers],
            "travel": [[s, c, p, vehicle_for[p], h] for (s, c, p), (h, _) in routes.items()],
            "rw_travel": [[a, b, "RW", "T10", h] for (a, b), (h, _) in rw_routes.items()],
        },
        "costs": {
            "distribution": [[s, c, p, vehicle_for[p], x] for (s, c, p), (_, x) in routes.items()],
            "rw_supply": [[a, b, "RW", "T10", x] for (a, b), (_, x) in rw_routes.items()],
            "extra_tanker": [["T10", "RW", 4000.0], ["T10", "DPW", 4000.0],
                             ["T6", "UPDW", 3000.0]],
            "penalties": {"DPW": {"surplus": 300.0, "shortfall": 3000.0},
                          "UPDW": {"surplus": 100.0, "shortfall": 5000.0}},
        },
        "tanker_availability": [[*k, n] for k, n in sorted(availability.items())],
        "demand": [{"consumer": c, "product": p,
                    "profile": [round(float(x), 3) for x in rate * prof]}
                   for (c, p), rate in mean_rate.items()],
    }
