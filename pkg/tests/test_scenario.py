import json

import numpy as np
import pytest

from uavcoop.errors import ParameterError, PlacementError, ScenarioParseError
from uavcoop.scenario import (
    SimParams,
    dbm_to_w,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_to_dict,
    w_to_dbm,
)


def test_dbm_roundtrip():
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert dbm_to_w(46.0) == pytest.approx(39.81, rel=1e-3)
    assert w_to_dbm(dbm_to_w(-174.0 + 63.0)) == pytest.approx(-111.0)


def test_derived_quantities():
    p = SimParams()
    assert p.d_max == pytest.approx(2.0)
    assert p.r_min == pytest.approx(0.4)
    assert p.noise_power == pytest.approx(10 ** -20.4 * 2e6)


def test_equal_weights_sum_to_one():
    p = SimParams.with_equal_weights(num_uavs=5, bs_antennas=6)
    assert p.alpha_0 == pytest.approx(1 / 6)
    assert len(p.alpha_uav) == 5
    p.validate()


def test_table1_sizes():
    p = SimParams.table1()
    assert (p.num_uavs, p.num_users, p.num_slots, p.num_blocks, p.bs_antennas) == (4, 4, 50, 30, 12)
    p.validate()


@pytest.mark.parametrize(
    "changes",
    [
        dict(num_slots=0),
        dict(bandwidth_hz=-1.0),
        dict(bs_antennas=2),                           # N < L
        dict(num_users=7),                             # L*M < K
        dict(alpha_0=0.5),                             # weights no longer sum to 1
        dict(alpha_uav=(0.25, 0.25)),
        dict(nav_c1=-1.0),
    ],
)
def test_validate_rejects(changes):
    with pytest.raises(ParameterError):
        SimParams.with_equal_weights().replace(**changes).validate()


def test_generation_respects_geometry(desk_params):
    for seed in range(5):
        s = generate_scenario(desk_params, seed)
        g = s.geometry
        r = np.hypot(g.user_positions[:, 0], g.user_positions[:, 1])
        assert np.all((r >= g.ring_inner) & (r <= g.ring_outer))
        starts = g.uav_start_positions
        assert np.all(starts >= g.nav_min) and np.all(starts <= g.nav_max)
        for i in range(s.L):
            for j in range(i + 1, s.L):
                assert np.linalg.norm(starts[i] - starts[j]) >= desk_params.d_min


def test_generation_is_seeded(desk_params):
    assert generate_scenario(desk_params, 3) == generate_scenario(desk_params, 3)
    assert generate_scenario(desk_params, 3) != generate_scenario(desk_params, 4)


def test_placement_error_when_separation_impossible(desk_params):
    with pytest.raises(PlacementError):
        generate_scenario(desk_params.replace(d_min=1e6), 0)


def test_save_load_roundtrip(tmp_path, desk_params):
    s = generate_scenario(desk_params, 7)
    path = tmp_path / "s.json"
    save_scenario(s, path)
    assert load_scenario(path) == s


def test_truncated_file_reports_location(tmp_path, desk_params):
    path = tmp_path / "s.json"
    save_scenario(generate_scenario(desk_params, 0), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ScenarioParseError) as info:
        load_scenario(path)
    assert info.value.location is not None


def test_bad_weights_in_file(tmp_path, desk_params):
    d = scenario_to_dict(generate_scenario(desk_params, 0))
    d["params"]["alpha_0"] = 0.9
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ParameterError):
        load_scenario(path)


def test_missing_field_in_file(tmp_path, desk_params):
    d = scenario_to_dict(generate_scenario(desk_params, 0))
    del d["geometry"]["nav_max"]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ScenarioParseError, match="geometry.nav_max"):
        load_scenario(path)
