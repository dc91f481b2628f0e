"""Decision state and physical evaluations: SINRs, rates, powers, constraints.

Array conventions (L UAVs, K users, T slots, M UAV antennas, N BS antennas):

    w_data      (L, K, T, M) complex   data beamformer of UAV l for user k in slot t
    w_fh        (L, T, N)    complex   BS beamformer for the fronthaul stream of UAV l
    trajectory  (L, T+1, 3)  float     index 0 is the block's start position
    coop        (L, K)       bool      cooperation decision q

Slot arguments ``t`` of the scalar helpers are 1-based (t = 1..T) so that
``trajectory[:, t]`` is the position used in slot t.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock
from .scenario import Scenario, SimParams


@dataclass(frozen=True, eq=False)
class SlackVars:
    """Auxiliary variables of the difference-of-convex reformulation.

    tau_data[l, k, t] upper-bounds the inverse path gain of the data link,
    tau_fh[l] lower-bounds the fronthaul SINR of UAV l over all slots and
    tau_q[l, k] upper-bounds the smooth cooperation indicator.
    tau_int[l, k, t] lower-bounds the same inverse path gain and divides the
    interference terms; without it a large tau_data would hide interference.
    """

    tau_data: np.ndarray    # (L, K, T)
    tau_fh: np.ndarray      # (L,)
    tau_q: np.ndarray       # (L, K)
    tau_int: np.ndarray | None = None   # (L, K, T), upper bound used for interference

    def __post_init__(self):
        for name in ("tau_data", "tau_fh", "tau_q"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.tau_int is not None:
            object.__setattr__(self, "tau_int", np.array(self.tau_int, dtype=float))

    @property
    def interference(self) -> np.ndarray:
        """Slack dividing interference terms; equals tau_data unless set."""
        return self.tau_data if self.tau_int is None else self.tau_int

    def __eq__(self, other):
        if not isinstance(other, SlackVars):
            return NotImplemented
        same = all(np.array_equal(getattr(self, n), getattr(other, n)) for n in ("tau_data", "tau_fh", "tau_q"))
        return same and np.array_equal(self.interference, other.interference)

    def is_valid(self) -> bool:
        return bool(
            np.all(self.tau_data > 0)
            and np.all(self.interference > 0)
            and np.all(self.tau_fh > 0)
            and np.all(self.tau_q >= 0)
            and np.all(self.tau_q < 1)
        )


@dataclass(frozen=True, eq=False)
class Plan:
    w_data: np.ndarray
    w_fh: np.ndarray
    trajectory: np.ndarray
    coop: np.ndarray
    slacks: SlackVars | None = None

    def __post_init__(self):
        object.__setattr__(self, "w_data", np.array(self.w_data, dtype=complex))
        object.__setattr__(self, "w_fh", np.array(self.w_fh, dtype=complex))
        object.__setattr__(self, "trajectory", np.array(self.trajectory, dtype=float))
        object.__setattr__(self, "coop", np.array(self.coop, dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, Plan):
            return NotImplemented
        same = all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in ("w_data", "w_fh", "trajectory", "coop")
        )
        return same and self.slacks == other.slacks

    @property
    def shape(self):
        L, K, T, M = self.w_data.shape
        return L, K, T, M, self.w_fh.shape[2]

    def replace(self, **changes) -> "Plan":
        return dataclasses.replace(self, **changes)

    def check_dims(self, scenario: Scenario) -> None:
        p = scenario.params
        L, K, T, M, N = p.num_uavs, p.num_users, p.num_slots, p.uav_antennas, p.bs_antennas
        if self.w_data.shape != (L, K, T, M):
            raise ValueError(f"w_data shape {self.w_data.shape} != {(L, K, T, M)}")
        if self.w_fh.shape != (L, T, N):
            raise ValueError(f"w_fh shape {self.w_fh.shape} != {(L, T, N)}")
        if self.trajectory.shape != (L, T + 1, 3):
            raise ValueError(f"trajectory shape {self.trajectory.shape} != {(L, T + 1, 3)}")
        if self.coop.shape != (L, K):
            raise ValueError(f"coop shape {self.coop.shape} != {(L, K)}")
        if not np.array_equal(self.trajectory[:, 0], scenario.geometry.uav_start_positions):
            raise ValueError("trajectory[:, 0] must equal the scenario's UAV start positions")

    @classmethod
    def hover(cls, scenario: Scenario, coop=None) -> "Plan":
        """All-zero beamformers with every UAV parked at its start position."""
        p = scenario.params
        L, K, T, M, N = p.num_uavs, p.num_users, p.num_slots, p.uav_antennas, p.bs_antennas
        starts = scenario.geometry.uav_start_positions
        traj = np.repeat(starts[:, None, :], T + 1, axis=1)
        return cls(
            w_data=np.zeros((L, K, T, M), complex),
            w_fh=np.zeros((L, T, N), complex),
            trajectory=traj,
            coop=np.zeros((L, K), bool) if coop is None else coop,
        )


@dataclass(frozen=True)
class QosSpec:
    gamma_min: np.ndarray   # (K,) linear SINR targets
    r_min: np.ndarray       # (K,) bit/s/Hz

    @classmethod
    def from_rates(cls, r_min) -> "QosSpec":
        r = np.atleast_1d(np.asarray(r_min, dtype=float))
        return cls(gamma_min=2.0 ** (2.0 * r) - 1.0, r_min=r)

    @classmethod
    def from_params(cls, params: SimParams) -> "QosSpec":
        return cls.from_rates(np.full(params.num_users, params.r_min))

    def fronthaul_target(self, coop) -> np.ndarray:
        """Required fronthaul SINR 2^(sum_k q R_k) - 1 per UAV."""
        return 2.0 ** (np.asarray(coop, float) @ self.r_min) - 1.0


# --- geometry -----------------------------------------------------------------

def link_distances(trajectory, scenario: Scenario):
    """Distances for slots 1..T: data links (L, K, T) and fronthaul links (L, T)."""
    pos = np.asarray(trajectory)[:, 1:, :]
    users = scenario.geometry.user_positions
    d = np.linalg.norm(pos[:, None, :, :] - users[None, :, None, :], axis=-1)
    dF = np.linalg.norm(pos - scenario.geometry.bs_position, axis=-1)
    return d, dF


def distances(plan: Plan, scenario: Scenario, t: int):
    pos = plan.trajectory[:, t, :]
    d = np.linalg.norm(pos[:, None, :] - scenario.geometry.user_positions[None, :, :], axis=-1)
    dF = np.linalg.norm(pos - scenario.geometry.bs_position, axis=-1)
    return d, dF


def path_gains(trajectory, scenario: Scenario):
    p = scenario.params
    d, dF = link_distances(trajectory, scenario)
    return p.antenna_gain_data * d ** -p.pathloss_exponent_data, p.antenna_gain_fh * dF ** -p.pathloss_exponent_fh


# --- SINR and rate ----------------------------------------------------------------

def data_cross_gains(w_data, channels: ChannelBlock) -> np.ndarray:
    """X[l, k, j, t] = |g_{l,k}^H w_{l,j,t}|^2."""
    return np.abs(np.einsum("lkm,ljtm->lkjt", channels.g_data.conj(), w_data)) ** 2


def fronthaul_cross_gains(w_fh, channels: ChannelBlock) -> np.ndarray:
    """Y[l, j, t] = ||G_l^H w_{F,j,t}||^2 with G_l = g_tx g_rx^H."""
    rx2 = np.sum(np.abs(channels.g_fh_rx) ** 2, axis=1)
    inner = np.abs(np.einsum("ln,jtn->ljt", channels.g_fh_tx.conj(), w_fh)) ** 2
    return rx2[:, None, None] * inner


def sinr_data_all(plan: Plan, channels: ChannelBlock, scenario: Scenario) -> np.ndarray:
    """Data SINR of every user in every slot, shape (K, T)."""
    sigma2 = scenario.params.noise_power
    pg, _ = path_gains(plan.trajectory, scenario)              # (L, K, T)
    X = data_cross_gains(plan.w_data, channels)                 # (L, K, K, T)
    K = X.shape[1]
    own = np.eye(K, dtype=bool)[None, :, :, None]
    signal = np.sum(pg * np.einsum("lkkt->lkt", X), axis=0)
    interference = np.sum(pg * np.sum(np.where(own, 0.0, X), axis=2), axis=0)
    return signal / (sigma2 + interference)


def sinr_fronthaul_all(plan: Plan, channels: ChannelBlock, scenario: Scenario) -> np.ndarray:
    """Fronthaul SINR of every UAV in every slot, shape (L, T)."""
    sigma2 = scenario.params.noise_power
    _, pgF = path_gains(plan.trajectory, scenario)              # (L, T)
    Y = fronthaul_cross_gains(plan.w_fh, channels)              # (L, L, T)
    L = Y.shape[0]
    own = np.eye(L, dtype=bool)[:, :, None]
    signal = pgF * np.einsum("llt->lt", Y)
    interference = pgF * np.sum(np.where(own, 0.0, Y), axis=1)
    return signal / (sigma2 + interference)


def sinr_data(plan: Plan, channels: ChannelBlock, scenario: Scenario, k: int, t: int) -> float:
    p = scenario.params
    d, _ = distances(plan, scenario, t)
    signal = interference = 0.0
    for l in range(plan.w_data.shape[0]):
        pg = p.antenna_gain_data / d[l, k] ** p.pathloss_exponent_data
        g = channels.g_data[l, k]
        for j in range(plan.w_data.shape[1]):
            power = pg * abs(np.vdot(g, plan.w_data[l, j, t - 1])) ** 2
            if j == k:
                signal += power
            else:
                interference += power
    return signal / (p.noise_power + interference)


def sinr_fronthaul(plan: Plan, channels: ChannelBlock, scenario: Scenario, l: int, t: int) -> float:
    p = scenario.params
    _, dF = distances(plan, scenario, t)
    pg = p.antenna_gain_fh / dF[l] ** p.pathloss_exponent_fh
    G = np.outer(channels.g_fh_tx[l], channels.g_fh_rx[l].conj())
    signal = interference = 0.0
    for j in range(plan.w_fh.shape[0]):
        power = pg * np.linalg.norm(G.conj().T @ plan.w_fh[j, t - 1]) ** 2
        if j == l:
            signal += power
        else:
            interference += power
    return signal / (p.noise_power + interference)


def rate(gamma):
    """Achievable rate in bit/s/Hz; the 1/2 accounts for the fronthaul/data time split."""
    return 0.5 * np.log2(1.0 + np.asarray(gamma, dtype=float))


# --- power ----------------------------------------------------------------------

def step_lengths(trajectory) -> np.ndarray:
    return np.linalg.norm(np.diff(np.asarray(trajectory), axis=1), axis=-1)


def nav_power_all(plan: Plan, scenario: Scenario) -> np.ndarray:
    p = scenario.params
    return p.nav_c1 + p.nav_c2 * step_lengths(plan.trajectory)


def nav_power(plan: Plan, scenario: Scenario, l: int, t: int) -> float:
    p = scenario.params
    return p.nav_c1 + p.nav_c2 * float(np.linalg.norm(plan.trajectory[l, t] - plan.trajectory[l, t - 1]))


@dataclass(frozen=True, eq=False)
class PowerReport:
    """Power breakdown of a plan.

    Per-slot arrays are instantaneous powers in W. The aggregates follow the
    objective's convention of summing over the T slots of the block:
    ``weighted_total`` is the objective value, ``bs_total`` the summed BS
    transmit power and ``per_uav_avg`` the summed UAV power divided by L.
    """

    per_slot_bs: np.ndarray         # (T,)
    per_slot_uav_tx: np.ndarray     # (L, T)
    per_slot_uav_nav: np.ndarray    # (L, T)
    weighted_total: float
    per_uav_avg: float
    bs_total: float


def weighted_sum(alpha_0, alpha_uav, bs, tx, nav) -> float:
    alpha_uav = np.asarray(alpha_uav, float)
    per_slot = alpha_0 * bs + np.sum(alpha_uav[:, None] * (tx + nav), axis=0)
    return float(np.sum(per_slot))


def objective(plan: Plan, scenario: Scenario) -> PowerReport:
    p = scenario.params
    bs = np.sum(np.abs(plan.w_fh) ** 2, axis=(0, 2))
    tx = np.sum(np.abs(plan.w_data) ** 2, axis=(1, 3))
    nav = nav_power_all(plan, scenario)
    L = tx.shape[0]
    return PowerReport(
        per_slot_bs=bs,
        per_slot_uav_tx=tx,
        per_slot_uav_nav=nav,
        weighted_total=weighted_sum(p.alpha_0, p.alpha_uav, bs, tx, nav),
        per_uav_avg=float(np.sum(tx + nav)) / L,
        bs_total=float(np.sum(bs)),
    )


# --- constraint check -------------------------------------------------------------

CONSTRAINT_IDS = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9")


@dataclass(frozen=True)
class ConstraintCheck:
    worst_slack: float
    violations: tuple       # index tuples whose slack < -tol


@dataclass(frozen=True)
class ViolationReport:
    tol: float
    checks: dict

    @property
    def ok(self) -> bool:
        return all(not c.violations for c in self.checks.values())

    def violated(self) -> list:
        return [cid for cid in CONSTRAINT_IDS if self.checks[cid].violations]

    def __getitem__(self, cid) -> ConstraintCheck:
        return self.checks[cid]

    def summary(self) -> str:
        parts = []
        for cid in CONSTRAINT_IDS:
            c = self.checks[cid]
            flag = "ok" if not c.violations else f"{len(c.violations)} violated"
            parts.append(f"{cid}: worst slack {c.worst_slack:.3e} ({flag})")
        return "\n".join(parts)


def _collect(slack, tol) -> ConstraintCheck:
    slack = np.asarray(slack, float)
    if slack.size == 0:
        return ConstraintCheck(worst_slack=float("inf"), violations=())
    bad = np.argwhere(slack < -tol)
    return ConstraintCheck(worst_slack=float(np.min(slack)), violations=tuple(tuple(int(i) for i in b) for b in bad))


def constraint_slacks(plan: Plan, channels: ChannelBlock, scenario: Scenario, qos: QosSpec) -> dict:
    """Signed slack of every C1-C9 instance (>= 0 means satisfied).

    Power and distance constraints use absolute slack (W, m); the SINR
    constraints C5 and C6 use slack relative to their target.
    """
    p = scenario.params
    g = scenario.geometry
    L, K, T, _, _ = plan.shape
    bs = np.sum(np.abs(plan.w_fh) ** 2, axis=(0, 2))
    beam = np.sum(np.abs(plan.w_data) ** 2, axis=3)                 # (L, K, T)
    tx = np.sum(beam, axis=1)
    nav = nav_power_all(plan, scenario)
    q = plan.coop
    q_float = q.astype(float)

    gd = sinr_data_all(plan, channels, scenario)
    c5 = gd / qos.gamma_min[:, None] - 1.0

    gf = sinr_fronthaul_all(plan, channels, scenario)
    target = qos.fronthaul_target(q)[:, None]
    c6 = np.where(target > 0, (gf - target) / np.where(target > 0, target, 1.0), gf)

    steps = step_lengths(plan.trajectory)
    pos = plan.trajectory[:, 1:, :]
    c8 = []
    for t in range(T):
        for l in range(L):
            for j in range(l + 1, L):
                c8.append(np.linalg.norm(pos[l, t] - pos[j, t]) - p.d_min)
    c8 = np.array(c8).reshape(T, -1) if L > 1 else np.zeros((T, 0))
    c9 = np.minimum(pos - g.nav_min, g.nav_max - pos).min(axis=-1)

    binary = np.isin(np.asarray(plan.coop).astype(np.int64), (0, 1))
    return {
        "C1": p.p_bs_max - bs,
        "C2": p.p_uav_max - (tx + nav),
        "C3": np.where(binary, 0.0, -1.0),
        "C4": p.p_uav_max * q_float - np.max(beam, axis=2),
        "C5": c5,
        "C6": c6,
        "C7": p.d_max - steps,
        "C8": c8,
        "C9": c9,
    }


def check_constraints(plan: Plan, channels: ChannelBlock, scenario: Scenario, qos: QosSpec, tol: float = 1e-6) -> ViolationReport:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    slacks = constraint_slacks(plan, channels, scenario, qos)
    return ViolationReport(tol=tol, checks={cid: _collect(slacks[cid], tol) for cid in CONSTRAINT_IDS})
