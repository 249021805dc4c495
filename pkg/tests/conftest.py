import copy

import numpy as np
import pytest

from tankersched.instance import instance_from_dict
from tankersched.instances import tiny_instance, tiny_instance_dict
from tankersched.scenario import uniform_scenarios
from tankersched.solver import SolveConfig

HIGHS = SolveConfig(backend="highs", gap_limit=1e-9)
BNB = SolveConfig(backend="bnb", gap_limit=1e-9)


@pytest.fixture
def tiny():
    return tiny_instance()


@pytest.fixture
def tiny_doc():
    return copy.deepcopy(tiny_instance_dict())


def two_scenarios(inst, low=0.85, high=1.15):
    """Equiprobable pair scaling every demand cell down and up."""
    dem = [{cp: np.asarray(prof) * f for cp, prof in inst.demand.items()} for f in (low, high)]
    return uniform_scenarios(inst, dem)


@pytest.fixture
def tiny_k2(tiny):
    return two_scenarios(tiny)


def edit(doc, fn):
    out = copy.deepcopy(doc)
    fn(out)
    return instance_from_dict(out)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

