import numpy as np
import pytest

from uavcoop.cone import validate
from uavcoop.errors import AssignmentError, RankOneError
from uavcoop.model import check_constraints
from uavcoop.sdr import (
    InitConfig,
    build_init_sdp,
    extract_rank1,
    initial_trajectory_and_coop,
    initialize,
    nearest_assignment,
)


def test_nearest_assignment_with_overflow():
    # both users prefer UAV 0; the farther one overflows to UAV 1
    dist = np.array([[1.0, 2.0], [5.0, 6.0]])
    q = nearest_assignment(dist, cap=1)
    assert q.tolist() == [[True, False], [False, True]]
    assert nearest_assignment(dist, cap=2).tolist() == [[True, True], [False, False]]
    with pytest.raises(AssignmentError):
        nearest_assignment(np.ones((1, 3)), cap=2)


def test_every_user_is_covered(desk):
    s, _, _ = desk
    traj, q = initial_trajectory_and_coop(s)
    assert traj.shape == (s.L, s.T + 1, 3)
    assert np.all(q.sum(axis=0) == 1)
    _, full = initial_trajectory_and_coop(s, InitConfig(coop_mode="full_cooperation"))
    assert full.all()


def test_extract_rank1():
    v = np.array([1.0, 1j, -2.0])
    w = extract_rank1(np.outer(v, v.conj()))
    np.testing.assert_allclose(np.outer(w, w.conj()), np.outer(v, v.conj()), atol=1e-12)
    with pytest.raises(RankOneError) as info:
        extract_rank1(np.eye(3))
    assert info.value.ratio == pytest.approx(1.0)
    assert np.all(extract_rank1(np.zeros((2, 2))) == 0)


def test_sdp_is_well_formed(desk):
    s, ch, qos = desk
    traj, q = initial_trajectory_and_coop(s)
    assert validate(build_init_sdp(traj, q, ch, s, qos, 1)).valid


def test_initialize_is_feasible_and_rank_one(desk):
    s, ch, qos = desk
    plan, report = initialize(s, ch, qos)
    assert report.coop_mode == "nearest_uav"
    assert report.randomized_slots == []
    assert report.max_rank_ratio <= 1e-6
    assert check_constraints(plan, ch, s, qos).ok
    assert plan.slacks.is_valid()
    # the extracted beams cannot cost less than their relaxation
    p = s.params
    tx = p.alpha_0 * np.sum(np.abs(plan.w_fh) ** 2) + sum(
        p.alpha_uav[l] * np.sum(np.abs(plan.w_data[l]) ** 2) for l in range(s.L)
    )
    assert tx >= report.relaxation_value * (1 - 1e-6)


def test_full_cooperation_uses_randomization(desk):
    # with every UAV serving both users the relaxation is not tight
    s, ch, qos = desk
    plan, report = initialize(s, ch, qos, InitConfig(coop_mode="full_cooperation"))
    assert report.randomized_slots == list(range(1, s.T + 1))
    assert check_constraints(plan, ch, s, qos).ok


def test_config_validation():
    with pytest.raises(ValueError):
        InitConfig(coop_mode="everyone")
    with pytest.raises(ValueError):
        InitConfig(rank1_tol=0.0)
