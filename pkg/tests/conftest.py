import json
from pathlib import Path

import pytest

from hydrosim.circuits import CircuitKind
from hydrosim.config import parse_config
from hydrosim.engine import DutyCycle, SimConfig, run_scenario

HERE = Path(__file__).parent

# criterion id -> (passed, description); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def derived():
    return json.loads((HERE / "fixtures" / "derived_values.json").read_text())


@pytest.fixture(scope="session")
def nominal():
    """The shipped default scenario."""
    return parse_config("")


@pytest.fixture(scope="session")
def params(nominal):
    return nominal.params


@pytest.fixture(scope="session")
def short_duty():
    """Two-second extend / hold / retract cycle at the nominal load."""
    return DutyCycle(((0.0, 0.05), (0.6, 0.08), (1.3, 0.08), (2.0, 0.05)), ((0.0, 20000.0),), 2.0)


@pytest.fixture(scope="session")
def nominal_runs(nominal):
    """Full default duty cycle on both circuits, computed once per session."""
    return {k: run_scenario(k, nominal.params, nominal.duty, nominal.controller, nominal.sim) for k in CircuitKind}


@pytest.fixture(scope="session")
def short_runs(nominal, short_duty):
    sim = SimConfig(1e-3)
    return {k: run_scenario(k, nominal.params, short_duty, nominal.controller, sim) for k in CircuitKind}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: [int(p) if p.isdigit() else p for p in k.split(".")]):
        ok, text = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {text}")
