import json
from pathlib import Path

import numpy as np
import pytest

from uavcoop.channel import ChannelBlock, draw_block
from uavcoop.model import QosSpec
from uavcoop.scenario import Geometry, Scenario, SimParams, generate_scenario

DATA = Path(__file__).parent / "data"


@pytest.fixture
def desk_params():
    return SimParams.with_equal_weights()


@pytest.fixture
def desk(desk_params):
    """(scenario, channels, qos) at desk scale, seed 0."""
    s = generate_scenario(desk_params, 0)
    return s, draw_block(s, 0), QosSpec.from_params(desk_params)


def load_micro():
    raw = json.loads((DATA / "micro_instance.json").read_text())
    p = raw["params"]
    params = SimParams(**{**p, "alpha_uav": tuple(p["alpha_uav"])})
    geometry = Geometry(**raw["geometry"])
    scenario = Scenario(params=params, geometry=geometry, seed=raw["seed"])
    ch = raw["channels"]

    def cplx(a):
        a = np.asarray(a, float)
        return a[..., 0] + 1j * a[..., 1]

    block = ChannelBlock(g_data=cplx(ch["g_data"]), g_fh_tx=cplx(ch["g_fh_tx"]), g_fh_rx=cplx(ch["g_fh_rx"]))
    return scenario, block, raw


@pytest.fixture
def micro():
    return load_micro()


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    def record(number, title, ok, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
