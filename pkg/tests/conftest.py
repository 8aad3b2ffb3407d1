import copy

import pytest

from harness.config import parse_scenario
from storage import duck

SCALAR_BASE = {
    "scenario": {
        "name": "scalar_case",
        "kind": "scalar",
        "duration_s": 2.0,
        "sample_period_s": 0.01,
        "settle_skip_s": 1.0,
    },
    "scalar": {"a": -0.5, "b": 0.2, "g": 1.0, "x0": 0.0},
    "trajectories": {"x": {"kind": "constant", "breakpoints": [[0.0, 1.0]]}},
}

ENGINE_BASE = {
    "scenario": {
        "name": "engine_case",
        "kind": "engine",
        "duration_s": 2.0,
        "sample_period_s": 0.02,
        "settle_skip_s": 1.0,
    },
    "adc": {ch: {"passthrough": True} for ch in ("t_exh", "mdot_f", "omega_e", "m_a")},
    "trajectories": {
        "t_exh": {"kind": "constant", "breakpoints": [[0.0, 800.0]]},
        "omega_e": {"kind": "constant", "breakpoints": [[0.0, 125.0]]},
        "afr": {"kind": "constant", "breakpoints": [[0.0, 14.7]]},
    },
}


def merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@pytest.fixture
def scalar_scenario():
    """Factory: scalar scenario with table-level overrides merged in."""

    def make(**tables):
        return parse_scenario(merge(SCALAR_BASE, tables))

    return make


@pytest.fixture
def engine_scenario():
    """Factory: passthrough engine scenario with table-level overrides merged in."""

    def make(**tables):
        return parse_scenario(merge(ENGINE_BASE, tables))

    return make


@pytest.fixture
def tmp_db(tmp_path):
    duck.set_database(tmp_path / "runs.duckdb")
    yield tmp_path / "runs.duckdb"
    duck.close_connection()
