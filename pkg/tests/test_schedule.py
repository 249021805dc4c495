import dataclasses
import json

import pytest

from conftest import HIGHS, edit
from tankersched.formulation import build_dt, build_tsr
from tankersched.instance import round_trip_slots, route_transit
from tankersched.scenario import mean_scenario, sample_demand_scenarios
from tankersched.schedule import (ExtractionError, Movement, extract_schedule, gantt_document,
                                  movements_to_csv, replay_validate, source_consumer_map,
                                  timelines_to_csv)
from tankersched.solver import INFEASIBLE, Solution, solve


@pytest.fixture
def solved(tiny):
    scen = sample_demand_scenarios(tiny, 3, 21)
    model = build_tsr(tiny, scen)
    return tiny, scen, model, solve(model, HIGHS)


def test_replay_clean_for_every_scenario(solved):
    inst, scen, model, sol = solved
    for k in range(len(scen)):
        sched = extract_schedule(inst, model, sol, scen, k)
        rep = replay_validate(inst, scen, k, sched.movements, sched)
        assert rep.ok, rep.violations


def test_arrivals_honor_transit(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen, 0)
    assert sched.movements
    for m in sched.movements:
        assert m.arrival == m.dispatch + route_transit(inst, (m.origin, m.destination), m.product,
                                                       sched.congestion)
        assert m.return_slot >= m.arrival


def test_volumes_lossless(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen, 1)
    for m in sched.movements:
        fam = "xPDL" if m.kind == "delivery" else "xRW"
        name = f"{fam}({m.origin},{m.destination},{m.product},{m.vehicle},{m.dispatch},1)"
        assert m.volume == pytest.approx(sol.assignment[name])


def test_empty_pool_dispatch_is_one_violation(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen, 0)
    nt = inst.horizon_nt
    lag = route_transit(inst, ("FW1", "C1"), "DPW", sched.congestion)
    rts = round_trip_slots(inst, ("FW1", "C1"), "DPW", "V1", sched.congestion)
    bogus = Movement(0, "R1", "V1", "FW1", "C1", "DPW", nt, nt + lag, nt + rts, 1000.0, 200)
    rep = replay_validate(inst, scen, 0, sched.movements + [bogus], sched)
    assert [v.family for v in rep.violations] == ["tanker_flow"]
    assert rep.violations[0].slot == nt


def test_inventory_below_min_is_one_violation(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen, 0)
    nt = inst.horizon_nt
    lag = route_transit(inst, ("TF1", "C1"), "DPW", sched.congestion)
    rts = round_trip_slots(inst, ("TF1", "C1"), "DPW", "V1", sched.congestion)
    drain = Movement(0, "R1", "V1", "TF1", "C1", "DPW", nt, nt + lag, nt + rts, 100.0, 20)
    pools = {key: 1e6 for key in inst.rvp}
    rep = replay_validate(inst, scen, 0, sched.movements + [drain], sched.timelines,
                          pool_initial=pools)
    assert [(v.family, v.slot) for v in rep.violations] == [("capacity_bounds", nt)]


def test_moved_arrival_is_flagged(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen, 0)
    m = dataclasses.replace(sched.movements[0], arrival=sched.movements[0].arrival + 1)
    rep = replay_validate(inst, scen, 0, [m] + sched.movements[1:], sched)
    assert any(v.family == "transit" for v in rep.violations)


def test_fractional_binaries_refused(solved):
    inst, scen, model, sol = solved
    bad = dict(sol.assignment)
    name = next(v.name for v in model.variables if v.kind == "B")
    bad[name] = 0.4
    with pytest.raises(ExtractionError) as exc:
        extract_schedule(inst, model, dataclasses.replace(sol, assignment=bad), scen, 0)
    assert (name, 0.4) in exc.value.variables


def test_no_incumbent_refused(solved):
    inst, scen, model, _ = solved
    with pytest.raises(ExtractionError):
        extract_schedule(inst, model, Solution(status=INFEASIBLE), scen, 0)


def test_zero_demand_gives_empty_schedule(tiny_doc):
    def f(d):
        for row in d["demand"]:
            row["profile"] = [0.0] * d["horizon_nt"]
    inst = edit(tiny_doc, f)
    scen = mean_scenario(inst)
    model = build_dt(inst, scen)
    sol = solve(model, HIGHS)
    sched = extract_schedule(inst, model, sol, scen)
    assert [m for m in sched.movements if m.kind == "delivery"] == []
    assert sched.timelines["TF1"].op == [inst.sources["TF1"].op_init] * inst.horizon_nt


def test_source_consumer_map_sums(solved):
    _, _, _, sol = solved
    smap = source_consumer_map(sol)
    for (c, p), rows in smap.items():
        total = sum(v for n, v in sol.assignment.items()
                    if n.startswith("xDeCon(") and n.split(",")[1] == c and n.split(",")[2] == p)
        assert sum(v for _, v in rows) == pytest.approx(total)
        assert [s for s, _ in rows] == sorted(s for s, _ in rows)


def test_exports(solved):
    inst, scen, model, sol = solved
    sched = extract_schedule(inst, model, sol, scen)
    csv = movements_to_csv(sched.movements)
    assert csv.splitlines()[0].startswith("k,region,vehicle")
    assert len(csv.splitlines()) == len(sched.movements) + 1
    assert "TF1" in timelines_to_csv(sched)
    doc = gantt_document(sched)
    json.dumps(doc)
    bars = sum(len(lane) for lane in doc["lanes"].values())
    assert bars == len(sched.movements)


def test_extract_all_matches_single(solved):
    from tankersched.schedule import extract_all
    inst, scen, model, sol = solved
    every = extract_all(inst, model, sol, scen)
    assert [s.k for s in every] == list(range(len(scen)))
    for k, sched in enumerate(every):
        assert sched == extract_schedule(inst, model, sol, scen, k)
