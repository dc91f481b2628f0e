import numpy as np
import pytest

from uavcoop.baselines import (
    BaselineId,
    baseline1_assignment,
    baseline2_assignment,
    baseline4_trajectory,
    run_baseline,
)
from uavcoop.errors import TrajectoryError
from uavcoop.model import check_constraints, step_lengths
from uavcoop.scenario import SimParams, generate_scenario


@pytest.mark.parametrize("alias,expected", [
    ("b1", BaselineId.COORDINATED_BEAMFORMING),
    ("Baseline2", BaselineId.FIXED_COOPERATION),
    ("hovering", BaselineId.HOVERING),
    ("fixed-trajectory", BaselineId.FIXED_TRAJECTORY),
])
def test_parse_aliases(alias, expected):
    assert BaselineId.parse(alias) is expected


def test_parse_unknown():
    with pytest.raises(ValueError):
        BaselineId.parse("b9")


def test_assignments(desk):
    s, _, _ = desk
    cap = min(s.params.uav_antennas, s.K)
    for seed in range(20):
        q1 = baseline1_assignment(s, seed)
        assert np.all(q1.sum(axis=0) == 1) and np.all(q1.sum(axis=1) <= cap)
        q2 = baseline2_assignment(s, seed)
        assert np.all(q2.sum(axis=1) == cap) and np.all(q2.sum(axis=0) >= 1)
    assert np.array_equal(baseline1_assignment(s, 5), baseline1_assignment(s, 5))


def test_fixed_trajectory_heads_for_the_wall(desk):
    s, _, _ = desk
    with pytest.raises(TrajectoryError):
        baseline4_trajectory(s)              # desk scale needs more than d_max per slot
    traj = baseline4_trajectory(s, on_overspeed="cap")
    assert traj.shape == (s.L, s.params.num_blocks * s.T + 1, 3)
    assert np.all(step_lengths(traj) <= s.params.d_max + 1e-9)
    r = np.hypot(traj[..., 0], traj[..., 1])
    assert np.all(np.diff(r, axis=1) >= -1e-9)
    np.testing.assert_array_equal(traj[:, :, 2], traj[:, :1, 2].repeat(traj.shape[1], axis=1))


def test_fixed_trajectory_in_reach():
    # a short flight that fits the speed limit is followed exactly
    s = generate_scenario(SimParams.with_equal_weights(num_blocks=1, num_slots=4), 0)
    g = s.geometry
    r = np.hypot(g.uav_start_positions[:, 0], g.uav_start_positions[:, 1])
    near = g.uav_start_positions.copy()
    near[:, :2] *= ((g.ring_outer - 1.0) / r)[:, None]
    traj = baseline4_trajectory(s.with_starts(near))
    np.testing.assert_allclose(np.hypot(traj[:, -1, 0], traj[:, -1, 1]), g.ring_outer)


@pytest.mark.parametrize("bid", list(BaselineId))
def test_every_baseline_yields_a_feasible_plan(desk, bid):
    s, ch, qos = desk
    plan, trace = run_baseline(bid, s, ch, qos, assignment_seed=1)
    assert trace.converged and not trace.polish_failed
    assert check_constraints(plan, ch, s, qos).ok
    if bid in (BaselineId.HOVERING, BaselineId.FIXED_TRAJECTORY):
        assert trace.init_report is not None
    if bid is BaselineId.HOVERING:
        assert np.all(step_lengths(plan.trajectory) == 0)
