import json
import math
from pathlib import Path

import pytest
from hypothesis import settings

from tempomix import CylinderFunction, RoofFunction, SymbolicSystem

HERE = Path(__file__).resolve().parent
DATA = HERE / "data"
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

GOLDEN = (1 + math.sqrt(5)) / 2

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def frozen():
    return json.loads((HERE / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def full2():
    return SymbolicSystem.full_shift(2)


@pytest.fixture(scope="session")
def golden_shift():
    return SymbolicSystem.golden_mean()


def load_roof(name: str, system=None) -> RoofFunction:
    system = system or SymbolicSystem.full_shift(2)
    return RoofFunction.from_json(system, json.loads((DATA / name).read_text()))


@pytest.fixture(scope="session")
def golden_roof(full2):
    return load_roof("roof_1_golden.json", full2)


@pytest.fixture(scope="session")
def sqrt2_roof(full2):
    return load_roof("roof_1_sqrt2.json", full2)


@pytest.fixture(scope="session")
def bernoulli_phi(full2):
    return CylinderFunction.constant(full2, -math.log(2))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
