import math

import numpy as np
import pytest

from conftest import HIGHS
from tankersched.formulation import build_tsr
from tankersched.milp import BINARY, FIRST, SECOND, ModelError, MilpModel, read_mps, write_mps
from tankersched.solver import check_solution, solve


def _same_arrays(a, b):
    ca, Aa, sa, ba, la, ua, ia = a.arrays()
    cb, Ab, sb, bb, lb, ub, ib = b.arrays()
    assert np.allclose(ca, cb)
    assert (Aa != Ab).nnz == 0
    assert list(sa) == list(sb)
    assert np.array_equal(ba, bb) and np.array_equal(la, lb) and np.array_equal(ua, ub)
    assert np.array_equal(ia, ib)


def test_mps_round_trip_tsr(tmp_path, tiny, tiny_k2):
    model = build_tsr(tiny, tiny_k2)
    path = tmp_path / "tsr.mps"
    write_mps(model, path)
    back = read_mps(path)
    assert back.names == model.names
    _same_arrays(model, back)
    assert solve(back, HIGHS).objective == pytest.approx(solve(model, HIGHS).objective, rel=1e-9)


def test_mps_bounds_and_constant(tmp_path):
    m = MilpModel("bounds")
    m.add_var("free", lb=-math.inf, ub=math.inf)
    m.add_var("neg", lb=-math.inf, ub=3.0)
    m.add_var("fixed", lb=2.5, ub=2.5)
    m.add_var("lo", lb=1.0)
    m.add_var("y", BINARY)
    m.obj_constant = 7.0
    m.add_row("f", "r", [(0, 1.0), (1, 1.0)], "<=", 4.0)
    write_mps(m, tmp_path / "b.mps")
    back = read_mps(tmp_path / "b.mps")
    _same_arrays(m, back)
    assert back.obj_constant == 7.0


def test_mps_parse_error_has_line(tmp_path):
    p = tmp_path / "bad.mps"
    p.write_text("NAME x\nROWS\n N OBJ\n Q R1\nENDATA\n")
    with pytest.raises(ModelError, match="line 4"):
        read_mps(p)


def test_duplicate_and_dangling_rejected():
    m = MilpModel()
    m.add_var("a")
    with pytest.raises(ModelError):
        m.add_var("a")
    with pytest.raises(ModelError):
        m.add_row("f", "r", [(3, 1.0)], "<=", 1.0)
    with pytest.raises(ModelError):
        m.col("nope")


def test_stage_tags(tiny, tiny_k2):
    model = build_tsr(tiny, tiny_k2)
    assert model.check_structure() == []
    for v in model.variables:
        assert (v.stage == FIRST) == (v.scenario is None)
    assert {v.scenario for v in model.variables if v.stage == SECOND} == {0, 1}


def test_check_solution_flags_each_kind(tiny, tiny_k2):
    model = build_tsr(tiny, tiny_k2)
    sol = solve(model, HIGHS)
    assert check_solution(model, sol.assignment).ok
    bad = dict(sol.assignment)
    b = model.variables[model.binaries()[0]].name
    bad[b] = 0.5
    rep = check_solution(model, bad)
    assert (b, 0.5) in rep.integrality
    bad = dict(sol.assignment)
    j = next(j for j, v in enumerate(model.variables) if math.isfinite(v.ub) and v.kind != BINARY)
    bad[model.variables[j].name] = model.variables[j].ub + 10.0
    assert check_solution(model, bad).bounds
