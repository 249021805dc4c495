import json

import pytest

from conftest import edit
from tankersched.instance import (CongestionLevel, InstanceError, LegError, dump_instance,
                                  instance_from_dict, instance_to_dict, load_instance,
                                  round_trip_hours, route_transit, transit_hours,
                                  validate_instance)
from tankersched.instances import random_small_instance, reference_instance

NOM, HIGH = CongestionLevel.NOMINAL, CongestionLevel.HIGH


def test_tiny_is_valid(tiny):
    rep = validate_instance(tiny)
    assert rep.ok and not rep.warnings


def test_reference_is_valid():
    rep = validate_instance(reference_instance())
    assert rep.errors == [] and rep.warnings == []


def test_reference_shape():
    inst = reference_instance()
    assert inst.horizon_nt == 120
    assert sorted(inst.regions) == ["R1", "R2", "R3"]
    assert sorted(inst.sources) == ["FW2", "FW3", "GW1", "GW3", "TF1", "TF2"]
    assert set(inst.demand) == {("HHC1", "DPW"), ("HHC1", "UPDW"), ("CC1", "DPW"),
                                ("CC2", "DPW"), ("HC2", "UPDW"), ("HHC3", "DPW"),
                                ("HHC3", "UPDW"), ("HC3", "UPDW")}
    assert {c: inst.consumers[c].region for c in inst.consumers} == {
        "HHC1": "R1", "CC1": "R1", "CC2": "R2", "HC2": "R2", "HHC3": "R3", "HC3": "R3"}


@pytest.mark.parametrize("seed", range(5))
def test_random_small_instances_valid(seed):
    assert validate_instance(random_small_instance(seed)).ok


def test_buffer_above_max_names_inventory(tiny_doc):
    def f(d):
        d["inventory"][0]["buffer"] = 50.0
    rep = validate_instance(edit(tiny_doc, f))
    assert len(rep.errors) == 1
    assert "TF1,RWI,RW" in rep.errors[0].path


def test_updw_without_tf_route(tiny_doc):
    def f(d):
        d["suitability"]["SC"] = [["FW1", "C1"]]
        d["times"]["travel"] = [r for r in d["times"]["travel"] if r[0] != "TF1"]
        d["costs"]["distribution"] = [r for r in d["costs"]["distribution"] if r[0] != "TF1"]
        d["demand"][0]["profile"] = [0.0] * 6
    rep = validate_instance(edit(tiny_doc, f))
    assert len(rep.errors) == 1
    assert "UPDW" in rep.errors[0].message


def test_dangling_reference_is_reported_not_dropped(tiny_doc):
    def f(d):
        d["suitability"]["SC"].append(["FW1", "NOBODY"])
    rep = validate_instance(edit(tiny_doc, f))
    assert any("NOBODY" in v.message or "NOBODY" in v.path for v in rep.errors)


def test_demand_bounds_accepted_with_warning(tiny_doc):
    def f(d):
        d["demand_bounds"] = {"min": 0.0, "max": 10.0}
    rep = validate_instance(edit(tiny_doc, f))
    assert rep.ok and len(rep.warnings) == 1


def test_validation_is_pure(tiny):
    assert validate_instance(tiny) == validate_instance(tiny)


def test_transit_examples(tiny_doc):
    def f(d):
        d["times"]["travel"] = [[*r[:4], 1.5] for r in d["times"]["travel"]]
    inst = edit(tiny_doc, f)
    # TF1 carries no disinfection time: 1.5 travel + 0.5 prep
    assert transit_hours(inst, ("TF1", "C1"), "DPW", "V1", NOM) == 2
    assert transit_hours(inst, ("TF1", "C1"), "DPW", "V1", HIGH) == 3


def test_transit_zero_components_floor_at_one(tiny_doc):
    def f(d):
        d["times"]["travel"] = [[*r[:4], 0.0] for r in d["times"]["travel"]]
        d["times"]["prep"] = [[*r[:2], 0.0] for r in d["times"]["prep"]]
        d["times"]["disinfection"] = []
    inst = edit(tiny_doc, f)
    assert transit_hours(inst, ("FW1", "C1"), "DPW", "V1", NOM) == 1


def test_fw_adds_disinfection(tiny):
    # 1.5 travel + 0.5 prep + 0.5 disinfection
    assert transit_hours(tiny, ("FW1", "C1"), "DPW", "V1", NOM) == 3
    # round trip also counts the distribution time at the consumer
    assert round_trip_hours(tiny, ("FW1", "C1"), "DPW", "V1", NOM) == pytest.approx(4.5)


def test_unknown_leg_raises(tiny):
    with pytest.raises(LegError):
        transit_hours(tiny, ("GW1", "C1"), "DPW", "V1", NOM)


def test_transit_monotone_in_congestion():
    inst = reference_instance()
    for s, c, p, v in inst.delivery_legs():
        assert transit_hours(inst, (s, c), p, v, HIGH) >= transit_hours(inst, (s, c), p, v, NOM)
    for s, s2, p, v in inst.rw_legs():
        assert transit_hours(inst, (s, s2), p, v, HIGH) >= transit_hours(inst, (s, s2), p, v, NOM)


def test_reference_far_routes_slip_under_congestion():
    inst = reference_instance()
    slipped = [(s, c, p) for s, c, p in inst.delivery_routes()
               if route_transit(inst, (s, c), p, HIGH) > route_transit(inst, (s, c), p, NOM)]
    kept = [(s, c, p) for s, c, p in inst.delivery_routes() if (s, c, p) not in slipped]
    assert slipped and kept


def test_override_hours_replace_multiplier(tiny_doc):
    def f(d):
        d["congestion_overrides"] = [["TF1", "C1", 2.0]]
    inst = edit(tiny_doc, f)
    # 1.0 travel + 2.0 fixed overtime + 0.5 prep
    assert transit_hours(inst, ("TF1", "C1"), "DPW", "V1", HIGH) == 4


def test_round_trip_dict(tiny):
    doc = instance_to_dict(tiny)
    assert instance_to_dict(instance_from_dict(doc)) == doc


def test_dump_load(tmp_path, tiny):
    p = tmp_path / "t6.json"
    dump_instance(tiny, p)
    assert instance_to_dict(load_instance(p)) == instance_to_dict(tiny)


def test_empty_file_parse_error_has_line(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(InstanceError, match="line 1"):
        load_instance(p)


def test_bad_schema_version(tiny_doc):
    tiny_doc["schema_version"] = 99
    with pytest.raises(InstanceError):
        instance_from_dict(tiny_doc)


def test_reference_data_file_matches_builder():
    from tankersched.instances import build_reference_instance_dict, reference_instance_dict
    assert json.loads(json.dumps(build_reference_instance_dict())) == reference_instance_dict()
