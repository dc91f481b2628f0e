"""Comparison schemes: the CCP with either the cooperation pattern or the
trajectories frozen."""

from __future__ import annotations

import enum
import math

import numpy as np

from .ccp import CcpSettings, run
from .channel import ChannelBlock
from .errors import AssignmentError, TrajectoryError
from .model import QosSpec
from .scenario import Scenario
from .sdr import initialize


class BaselineId(str, enum.Enum):
    COORDINATED_BEAMFORMING = "CoordinatedBeamforming"   # one random UAV per user, q fixed
    FIXED_COOPERATION = "FixedCooperation"               # random clusters with full quotas, q fixed
    HOVERING = "Hovering"                                # d fixed at the start positions
    FIXED_TRAJECTORY = "FixedTrajectory"                 # d fixed on a straight flight to the wall

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name) -> "BaselineId":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "coordinatedbeamforming": cls.COORDINATED_BEAMFORMING, "baseline1": cls.COORDINATED_BEAMFORMING, "b1": cls.COORDINATED_BEAMFORMING,
            "fixedcooperation": cls.FIXED_COOPERATION, "baseline2": cls.FIXED_COOPERATION, "b2": cls.FIXED_COOPERATION,
            "hovering": cls.HOVERING, "baseline3": cls.HOVERING, "b3": cls.HOVERING,
            "fixedtrajectory": cls.FIXED_TRAJECTORY, "baseline4": cls.FIXED_TRAJECTORY, "b4": cls.FIXED_TRAJECTORY,
        }
        if key not in aliases:
            raise ValueError(f"unknown baseline {name!r}")
        return aliases[key]


def _cap(scenario: Scenario) -> int:
    p = scenario.params
    return min(p.uav_antennas, p.num_users)


def baseline1_assignment(scenario: Scenario, seed) -> np.ndarray:
    """Every user on exactly one uniformly drawn UAV; full UAVs are redrawn."""
    L, K = scenario.L, scenario.K
    cap = _cap(scenario)
    if K > L * cap:
        raise AssignmentError(f"{K} users do not fit on {L} UAVs with {cap} users each")
    rng = np.random.default_rng(seed)
    q = np.zeros((L, K), bool)
    load = np.zeros(L, int)
    for k in range(K):
        l = int(rng.integers(L))
        while load[l] >= cap:
            l = int(rng.integers(L))
        q[l, k] = True
        load[l] += 1
    return q


def baseline2_assignment(scenario: Scenario, seed) -> np.ndarray:
    """Each UAV serves exactly min(M, K) users and every user is served.

    Users are first spread over randomly ordered UAV slots so that everyone
    is covered, then every UAV fills its remaining quota with random users it
    does not serve yet.
    """
    L, K = scenario.L, scenario.K
    cap = _cap(scenario)
    if K > L * cap:
        raise AssignmentError(f"{K} users do not fit on {L} UAVs with {cap} users each")
    rng = np.random.default_rng(seed)
    q = np.zeros((L, K), bool)
    slots = rng.permutation(np.repeat(np.arange(L), cap))
    users = rng.permutation(K)
    for k, l in zip(users, slots[:K]):
        q[l, k] = True
    for l in range(L):
        missing = cap - int(q[l].sum())
        if missing > 0:
            free = np.flatnonzero(~q[l])
            q[l, rng.choice(free, size=missing, replace=False)] = True
    return q


def baseline4_trajectory(scenario: Scenario, num_blocks: int | None = None, on_overspeed: str = "error") -> np.ndarray:
    """Straight horizontal flight to the nearest point of the outer wall.

    The UAV covers the distance at constant speed over all B*T slots of the
    flight. Returns positions at every slot boundary, shape (L, B*T + 1, 3).
    With ``on_overspeed="cap"`` a UAV whose required step exceeds d_max flies
    at d_max and parks once it reaches the wall.
    """
    if on_overspeed not in ("error", "cap"):
        raise ValueError("on_overspeed must be 'error' or 'cap'")
    p = scenario.params
    g = scenario.geometry
    B = p.num_blocks if num_blocks is None else int(num_blocks)
    n = B * p.num_slots
    starts = g.uav_start_positions
    out = np.repeat(starts[:, None, :], n + 1, axis=1)
    R = g.ring_outer
    for l, s in enumerate(starts):
        r = math.hypot(s[0], s[1])
        dist = max(R - r, 0.0)
        if dist == 0.0:
            continue
        u = np.array([1.0, 0.0]) if r == 0.0 else s[:2] / r
        step = dist / n
        if step > p.d_max * (1 + 1e-12):
            if on_overspeed == "error":
                raise TrajectoryError(
                    f"UAV {l} needs {step:.2f} m per slot to reach the boundary, above d_max = {p.d_max:.2f} m"
                )
            step = p.d_max
        travelled = np.minimum(np.arange(n + 1) * step, dist)
        out[l, :, :2] = s[:2] + travelled[:, None] * u
    return out


def run_baseline(bid, scenario: Scenario, channels: ChannelBlock, qos: QosSpec, settings: CcpSettings | None = None, assignment_seed=0, trajectory=None):
    """Run one comparison scheme on one block. Returns ``(plan, trace)``.

    ``trajectory`` supplies the frozen positions of the fixed-trajectory
    scheme for this block (T + 1 points starting at the current positions);
    without it the speed-capped flight from the scenario's starts is used.
    """
    bid = BaselineId.parse(bid)
    settings = settings or CcpSettings()
    if bid in (BaselineId.COORDINATED_BEAMFORMING, BaselineId.FIXED_COOPERATION):
        assign = baseline1_assignment if bid is BaselineId.COORDINATED_BEAMFORMING else baseline2_assignment
        q = assign(scenario, assignment_seed)
        return run(scenario, channels, qos, settings, fixed_coop=q)

    if bid is BaselineId.HOVERING:
        traj = None
    else:
        if trajectory is None:
            trajectory = baseline4_trajectory(scenario, on_overspeed="cap")[:, : scenario.T + 1]
        traj = np.asarray(trajectory, float)
        if traj.shape != (scenario.L, scenario.T + 1, 3):
            raise ValueError(f"trajectory must have shape {(scenario.L, scenario.T + 1, 3)}")
    beta = settings.beta if settings.beta is not None else scenario.params.beta
    x0, report = initialize(scenario, channels, qos, settings.init, beta=beta, trajectory=traj)
    plan, trace = run(scenario, channels, qos, settings, x0=x0, fixed_trajectory=True)
    trace.init_report = report
    return plan, trace
