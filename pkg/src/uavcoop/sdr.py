"""Feasible starting point for the CCP: fix trajectories and cooperation, solve
the semidefinite relaxation of the beamforming problem slot by slot, pull
rank-one beamformers out of the solution and build the slack variables."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelBlock
from .cone import (
    Affine,
    ConeBuilder,
    ConeProgram,
    OPTIMAL,
    PositiveSemidefinite,
    SolverSettings,
    affsum,
    solve,
)
from .dcp import TAU_Q_MAX, build_dc_set
from .errors import AssignmentError, InitializationError, RankOneError
from .model import (
    Plan,
    QosSpec,
    SlackVars,
    path_gains,
    sinr_fronthaul_all,
    step_lengths,
)
from .scenario import Scenario

log = logging.getLogger(__name__)

TRAJECTORY_MODES = ("hover",)
COOP_MODES = ("nearest_uav", "full_cooperation")


@dataclass(frozen=True)
class InitConfig:
    trajectory_mode: str = "hover"
    coop_mode: str = "nearest_uav"
    rank1_tol: float = 1e-6
    qos_margin: float = 1e-6            # relative head-room on every SINR target
    fh_sinr_floor: float | None = None  # idle-UAV fronthaul SINR; None = one user's rate
    randomizations: int = 16
    seed: int = 0
    solver: SolverSettings = field(default_factory=lambda: SolverSettings(abs_tol=1e-9, rel_tol=1e-9, max_iters=400))

    def __post_init__(self):
        if self.trajectory_mode not in TRAJECTORY_MODES:
            raise ValueError(f"trajectory_mode must be one of {TRAJECTORY_MODES}")
        if self.coop_mode not in COOP_MODES:
            raise ValueError(f"coop_mode must be one of {COOP_MODES}")
        if not 0.0 < self.rank1_tol < 1.0:
            raise ValueError("rank1_tol must lie in (0, 1)")
        if self.qos_margin < 0 or (self.fh_sinr_floor is not None and self.fh_sinr_floor <= 0):
            raise ValueError("qos_margin must be >= 0 and fh_sinr_floor > 0")


# --- fixed trajectory and cooperation -------------------------------------------------

def nearest_assignment(dist, cap) -> np.ndarray:
    """Each user to its closest UAV, at most ``cap`` users per UAV.

    Users are placed in order of their best distance; a user whose nearest
    UAV is full overflows to the next closest one.
    """
    L, K = dist.shape
    if K > L * cap:
        raise AssignmentError(f"{K} users cannot be served by {L} UAVs with {cap} users each")
    q = np.zeros((L, K), bool)
    load = np.zeros(L, int)
    for k in sorted(range(K), key=lambda k: (dist[:, k].min(), k)):
        for l in np.argsort(dist[:, k], kind="stable"):
            if load[l] < cap:
                q[l, k] = True
                load[l] += 1
                break
    return q


def initial_trajectory_and_coop(scenario: Scenario, cfg: InitConfig | None = None):
    cfg = cfg or InitConfig()
    p = scenario.params
    starts = scenario.geometry.uav_start_positions
    traj = np.repeat(starts[:, None, :], p.num_slots + 1, axis=1)
    if cfg.coop_mode == "full_cooperation":
        return traj, np.ones((p.num_uavs, p.num_users), bool)
    dist = np.linalg.norm(starts[:, None, :] - scenario.geometry.user_positions[None, :, :], axis=-1)
    return traj, nearest_assignment(dist, min(p.uav_antennas, p.num_users))


# --- Hermitian PSD variables ---------------------------------------------------------

class _Herm:
    """An n x n Hermitian matrix variable W = X + iY held as real affine entries."""

    def __init__(self, b: ConeBuilder, name: str, n: int, scale: float = 1.0):
        self.n = n
        self.x = b.var(f"{name}.x", (n * (n + 1) // 2,))
        self.y = b.var(f"{name}.y", (n * (n - 1) // 2,))
        self.re = [[None] * n for _ in range(n)]
        self.im = [[Affine()] * n for _ in range(n)]
        c = d = 0
        for j in range(n):
            for i in range(j + 1):
                self.re[i][j] = self.re[j][i] = Affine.var(self.x[c], scale)
                c += 1
                if i < j:
                    self.im[i][j] = Affine.var(self.y[d], scale)
                    self.im[j][i] = Affine.var(self.y[d], -scale)
                    d += 1

    def psd(self, b: ConeBuilder, name: str):
        n = self.n
        Z = lambda i, j: (
            self.re[i][j] if i < n and j < n else
            self.re[i - n][j - n] if i >= n and j >= n else
            -self.im[i][j - n] if i < n else
            self.im[i - n][j]
        )
        rows = []
        for j in range(2 * n):
            for i in range(j + 1):
                rows.append(Z(i, j) if i == j else Z(i, j) * math.sqrt(2.0))
        b.add(rows, PositiveSemidefinite(2 * n), name)

    def trace(self) -> Affine:
        return affsum([self.re[i][i] for i in range(self.n)])

    def inner(self, R) -> Affine:
        """Re tr(R W) for Hermitian R."""
        terms = []
        for i in range(self.n):
            for j in range(self.n):
                r = R[j, i]
                if r.real:
                    terms.append(self.re[i][j] * r.real)
                if r.imag:
                    terms.append(self.im[i][j] * (-r.imag))
        return affsum(terms)

    def value(self, x) -> np.ndarray:
        n = self.n
        W = np.zeros((n, n), complex)
        for i in range(n):
            for j in range(n):
                W[i, j] = self.re[i][j].value(x) + 1j * self.im[i][j].value(x)
        return W


# --- the per-slot relaxation ---------------------------------------------------------

@dataclass
class _SlotSdp:
    program: ConeProgram
    data_vars: dict         # (l, k) -> _Herm
    fh_vars: list           # l -> _Herm
    scale_data: float
    scale_fh: float


def _fh_targets(coop, qos, floor):
    """Fronthaul SINR targets; idle UAVs keep a link able to carry one user.

    A strictly positive target keeps tau_F > 0 for the CCP and lets a later
    iteration hand users to a UAV that starts idle.
    """
    if floor is None:
        floor = 2.0 ** float(np.min(qos.r_min)) - 1.0
    return np.maximum(qos.fronthaul_target(coop), floor)


def _slot_sdp(trajectory, coop, channels, scenario, qos, t, cfg: InitConfig) -> _SlotSdp:
    p = scenario.params
    L, K, M, N = p.num_uavs, p.num_users, p.uav_antennas, p.bs_antennas
    sigma2 = p.noise_power
    pg_all, pgF_all = path_gains(trajectory, scenario)
    pg, pgF = pg_all[:, :, t - 1], pgF_all[:, t - 1]
    coop = np.asarray(coop, bool)
    gamma_data = qos.gamma_min * (1.0 + cfg.qos_margin)
    gamma_fh = _fh_targets(coop, qos, cfg.fh_sinr_floor) * (1.0 + cfg.qos_margin)
    nav = p.nav_c1 + p.nav_c2 * step_lengths(trajectory)[:, t - 1]

    g = channels.g_data
    R = np.einsum("lkm,lkn->lkmn", g, g.conj())                 # g g^H
    gains = pg * np.sum(np.abs(g) ** 2, axis=2)
    sd = sigma2 * float(np.mean(qos.gamma_min)) / float(np.median(gains[coop])) if coop.any() else 1.0
    gram = channels.fronthaul_gram()
    # per-UAV scale: idle UAVs only hold a floor SINR and would otherwise sit
    # at the solver's noise level, which blurs their rank
    sfl = sigma2 * gamma_fh / (pgF * N * M)
    sf = float(np.median(sfl))

    b = ConeBuilder()
    W = {}
    for l in range(L):
        for k in range(K):
            if coop[l, k]:
                W[l, k] = _Herm(b, f"W[{l},{k}]", M)
                W[l, k].psd(b, f"C10[{l},{k}]")
                b.nonneg(1.0 - W[l, k].trace() * (sd / p.p_uav_max), f"C4[{l},{k}]")
    WF = []
    for l in range(L):
        WF.append(_Herm(b, f"WF[{l}]", N, sfl[l] / sf))
        WF[l].psd(b, f"C10F[{l}]")

    obj = []
    for l in range(L):
        # data and fronthaul variables share no constraint, so each half of the
        # objective can be normalized on its own without moving the optimum
        obj.append(WF[l].trace() * p.alpha_0)
        tx = affsum([W[l, k].trace() for k in range(K) if (l, k) in W])
        obj.append(tx * p.alpha_uav[l])
        b.nonneg(1.0 - tx * (sd / p.p_uav_max) - nav[l] / p.p_uav_max, f"C2[{l}]")
    b.minimize(affsum(obj))
    b.nonneg(1.0 - affsum([WF[l].trace() for l in range(L)]) * (sf / p.p_bs_max), "C1")

    # C5: gamma_k * signal >= noise + all received data power, divided by noise
    for k in range(K):
        gam = 1.0 + 1.0 / gamma_data[k]
        sig, tot = [], []
        for l in range(L):
            c = pg[l, k] * sd / sigma2
            for j in range(K):
                if (l, j) in W:
                    e = W[l, j].inner(R[l, k]) * c
                    tot.append(e)
                    if j == k:
                        sig.append(e * gam)
        b.nonneg(affsum(sig) - affsum(tot) - 1.0, f"C5[{k}]")

    # C6: gamma_F * own fronthaul >= noise + all fronthaul power received by UAV l
    for l in range(L):
        gam = 1.0 + 1.0 / gamma_fh[l]
        c = pgF[l] * sf / sigma2
        tot = [WF[j].inner(gram[l]) * c for j in range(L)]
        b.nonneg(WF[l].inner(gram[l]) * (c * gam) - affsum(tot) - 1.0, f"C6[{l}]")

    return _SlotSdp(program=b.build(), data_vars=W, fh_vars=WF, scale_data=sd, scale_fh=sf)


def build_init_sdp(trajectory, coop, channels: ChannelBlock, scenario: Scenario, qos: QosSpec, t: int, cfg: InitConfig | None = None) -> ConeProgram:
    """Semidefinite relaxation for slot ``t`` (1-based) with d and q fixed.

    Links with q = 0 get no variable at all, which is what the trace bound
    tr W <= p_max q together with W >= 0 would force anyway.
    """
    return _slot_sdp(trajectory, coop, channels, scenario, qos, t, cfg or InitConfig()).program


def extract_rank1(W, tol=1e-6, return_ratio=False):
    """Principal-eigenvector beamformer sqrt(l1) v1 of a (numerically) rank-one W."""
    W = np.asarray(W, complex)
    W = 0.5 * (W + W.conj().T)
    lam, V = np.linalg.eigh(W)
    l1 = float(lam[-1])
    if l1 <= 0.0:
        w = np.zeros(W.shape[0], complex)
        return (w, 0.0) if return_ratio else w
    ratio = max(float(lam[-2]), 0.0) / l1 if W.shape[0] > 1 else 0.0
    if ratio > tol:
        raise RankOneError(ratio, tol)
    w = math.sqrt(l1) * V[:, -1]
    return (w, ratio) if return_ratio else w


# --- power control for fixed beam directions (randomization fallback) ------------------

def _power_control(dirs, dirsF, trajectory, coop, channels, scenario, qos, t, cfg):
    """Cheapest per-link powers for fixed unit directions in slot t, or None."""
    p = scenario.params
    L, K = coop.shape
    sigma2 = p.noise_power
    pg_all, pgF_all = path_gains(trajectory, scenario)
    pg, pgF = pg_all[:, :, t - 1], pgF_all[:, t - 1]
    nav = p.nav_c1 + p.nav_c2 * step_lengths(trajectory)[:, t - 1]
    gamma_data = qos.gamma_min * (1.0 + cfg.qos_margin)
    gamma_fh = _fh_targets(coop, qos, cfg.fh_sinr_floor) * (1.0 + cfg.qos_margin)
    X = np.abs(np.einsum("lkm,ljm->lkj", channels.g_data.conj(), dirs)) ** 2
    rx2 = np.sum(np.abs(channels.g_fh_rx) ** 2, axis=1)
    Y = rx2[:, None] * np.abs(channels.g_fh_tx.conj() @ dirsF.T) ** 2

    sd = sigma2 * float(np.mean(gamma_data)) / max(float(np.median((pg * np.einsum("lkk->lk", X))[coop])), 1e-300)
    sf = sigma2 * float(np.mean(gamma_fh)) / max(float(np.median(pgF * np.diag(Y))), 1e-300)
    b = ConeBuilder()
    a = b.var("a", (L, K))
    aF = b.var("aF", (L,))
    act = [(l, k) for l in range(L) for k in range(K) if coop[l, k]]
    for l in range(L):
        for k in range(K):
            b.nonneg(Affine.var(a[l, k]), "")
            if not coop[l, k]:
                b.nonneg(-Affine.var(a[l, k]), "")
        b.nonneg(Affine.var(aF[l]), "")
        b.nonneg(1.0 - affsum([Affine.var(a[l, k], sd / p.p_uav_max) for k in range(K)]) - nav[l] / p.p_uav_max, "C2")
    b.nonneg(1.0 - affsum([Affine.var(aF[l], sf / p.p_bs_max) for l in range(L)]), "C1")
    for k in range(K):
        gam = 1.0 + 1.0 / gamma_data[k]
        sig = [Affine.var(a[l, k], gam * pg[l, k] * X[l, k, k] * sd / sigma2) for l in range(L)]
        tot = [Affine.var(a[l, j], pg[l, k] * X[l, k, j] * sd / sigma2) for (l, j) in act]
        b.nonneg(affsum(sig) - affsum(tot) - 1.0, "C5")
    for l in range(L):
        gam = 1.0 + 1.0 / gamma_fh[l]
        c = pgF[l] * sf / sigma2
        tot = [Affine.var(aF[j], c * Y[l, j]) for j in range(L)]
        b.nonneg(Affine.var(aF[l], c * gam * Y[l, l]) - affsum(tot) - 1.0, "C6")
    b.minimize(affsum([Affine.var(a[l, k], p.alpha_uav[l]) for (l, k) in act] + [Affine.var(aF[l], p.alpha_0 * sf / sd) for l in range(L)]))
    sol = solve(b.build(), SolverSettings(backend="linprog"))
    if sol.status != OPTIMAL:
        return None
    x = sol.primal
    pw = np.maximum(x[a], 0.0) * sd
    pF = np.maximum(x[aF], 0.0) * sf
    return np.sqrt(pw)[:, :, None] * dirs, np.sqrt(pF)[:, None] * dirsF, sol.objective_value


def _random_directions(rng, Wd, WF, coop):
    L, K = coop.shape
    M = next(iter(Wd.values())).shape[0] if Wd else 1
    dirs = np.zeros((L, K, M), complex)
    for (l, k), W in Wd.items():
        lam, V = np.linalg.eigh(0.5 * (W + W.conj().T))
        z = (rng.standard_normal(len(lam)) + 1j * rng.standard_normal(len(lam))) / math.sqrt(2.0)
        u = V @ (np.sqrt(np.maximum(lam, 0.0)) * z)
        n = np.linalg.norm(u)
        dirs[l, k] = u / n if n > 0 else V[:, -1]
    dirsF = []
    for W in WF:
        lam, V = np.linalg.eigh(0.5 * (W + W.conj().T))
        z = (rng.standard_normal(len(lam)) + 1j * rng.standard_normal(len(lam))) / math.sqrt(2.0)
        u = V @ (np.sqrt(np.maximum(lam, 0.0)) * z)
        n = np.linalg.norm(u)
        dirsF.append(u / n if n > 0 else V[:, -1])
    return dirs, np.array(dirsF)


# --- slot solve and assembly --------------------------------------------------------

@dataclass
class SlotResult:
    status: str
    w_data: np.ndarray | None = None    # (L, K, M)
    w_fh: np.ndarray | None = None      # (L, N)
    max_ratio: float = 0.0
    randomized: bool = False
    relaxation_value: float = math.nan  # weighted transmit power of the SDP optimum (W)


def solve_slot(trajectory, coop, channels, scenario, qos, t, cfg: InitConfig) -> SlotResult:
    p = scenario.params
    L, K, M, N = p.num_uavs, p.num_users, p.uav_antennas, p.bs_antennas
    sdp = _slot_sdp(trajectory, coop, channels, scenario, qos, t, cfg)
    sol = solve(sdp.program, cfg.solver)
    if sol.primal is None or sol.status not in (OPTIMAL,):
        if sol.primal is None or sol.status != "NumericalLimit":
            return SlotResult(status=sol.status)
    x = sol.primal
    Wd = {key: sdp.scale_data * h.value(x) for key, h in sdp.data_vars.items()}
    WF = [sdp.scale_fh * h.value(x) for h in sdp.fh_vars]
    relax = p.alpha_0 * sum(np.trace(W).real for W in WF) + sum(
        p.alpha_uav[l] * np.trace(W).real for (l, _), W in Wd.items()
    )

    w_data = np.zeros((L, K, M), complex)
    w_fh = np.zeros((L, N), complex)
    # eigenvalues below this are solver noise; the link is simply not used
    floor_d = 1e-9 * max((np.trace(W).real for W in Wd.values()), default=0.0)
    floor_f = 1e-9 * max(np.trace(W).real for W in WF)
    worst = 0.0
    try:
        for (l, k), W in Wd.items():
            if np.trace(W).real <= floor_d:
                continue
            w_data[l, k], r = extract_rank1(W, cfg.rank1_tol, return_ratio=True)
            worst = max(worst, r)
        for l, W in enumerate(WF):
            if np.trace(W).real <= floor_f:
                continue
            w_fh[l], r = extract_rank1(W, cfg.rank1_tol, return_ratio=True)
            worst = max(worst, r)
    except RankOneError as err:
        log.warning("slot %d: %s; falling back to Gaussian randomization", t, err)
        rng = np.random.default_rng([cfg.seed, t])
        best = None
        for _ in range(cfg.randomizations):
            dirs, dirsF = _random_directions(rng, Wd, WF, np.asarray(coop, bool))
            out = _power_control(dirs, dirsF, trajectory, np.asarray(coop, bool), channels, scenario, qos, t, cfg)
            if out is not None and (best is None or out[2] < best[2]):
                best = out
        if best is None:
            return SlotResult(status="RandomizationFailed", max_ratio=err.ratio)
        return SlotResult(status=OPTIMAL, w_data=best[0], w_fh=best[1], max_ratio=err.ratio, randomized=True, relaxation_value=relax)
    return SlotResult(status=OPTIMAL, w_data=w_data, w_fh=w_fh, max_ratio=worst, relaxation_value=relax)


def construct_slacks(w_data, w_fh, trajectory, coop, channels: ChannelBlock, scenario: Scenario, qos: QosSpec, beta=None, fixed_coop=False, tol=1e-6) -> SlackVars:
    """Slack variables that make (w, d, tau) a feasible point of the DC problem.

    tau_data is the exact inverse path gain, tau_fh the worst fronthaul SINR
    over the block and tau_q the smooth indicator of the strongest slot.
    With ``fixed_coop`` the binary q itself is used as tau_q.
    """
    p = scenario.params
    beta = p.beta if beta is None else beta
    coop = np.asarray(coop, bool)
    L, K, T, _ = np.shape(w_data)
    plan = Plan(w_data=w_data, w_fh=w_fh, trajectory=trajectory, coop=coop)
    pg, _ = path_gains(trajectory, scenario)
    tau_data = 1.0 / pg
    tau_fh = np.min(sinr_fronthaul_all(plan, channels, scenario), axis=1)
    if fixed_coop:
        tau_q = coop.astype(float)
    else:
        peak = np.max(np.sum(np.abs(plan.w_data) ** 2, axis=3), axis=2)
        tau_q = np.minimum(-np.expm1(-beta * peak), TAU_Q_MAX)
    slacks = SlackVars(tau_data=tau_data, tau_fh=tau_fh, tau_q=tau_q, tau_int=tau_data.copy())
    if np.any(tau_fh <= 0):
        raise InitializationError("fronthaul SINR is zero for some UAV", constraint="C6a")

    dc = build_dc_set(scenario, channels, qos, fixed_coop=coop if fixed_coop else None, fixed_trajectory=None)
    full = plan.replace(slacks=slacks)
    for cid, v in dc.violations(full).items():
        if v.size and float(np.max(v)) > tol:
            raise InitializationError(f"starting point violates the constraint by {float(np.max(v)):.3e}", constraint=cid)
    for cid, v in dc.convex_violations(full).items():
        if np.size(v) and float(np.max(v)) > tol:
            raise InitializationError(f"starting point violates the constraint by {float(np.max(v)):.3e}", constraint=cid)
    return slacks


@dataclass
class InitReport:
    coop_mode: str
    slot_status: list
    max_rank_ratio: float
    randomized_slots: list
    relaxation_value: float     # summed weighted transmit power of the relaxations (W)


def initialize(scenario: Scenario, channels: ChannelBlock, qos: QosSpec, cfg: InitConfig | None = None, beta=None, trajectory=None, coop=None, fixed_coop=False):
    """Feasible x0 = (w, d, tau) with the nearest-UAV then full-cooperation fallback.

    ``trajectory`` and ``coop`` override the configured modes (used by the
    baselines, which freeze one or both).
    """
    cfg = cfg or InitConfig()
    p = scenario.params
    channels.check_dims(p)
    modes = [cfg.coop_mode] if coop is not None or cfg.coop_mode == "full_cooperation" else ["nearest_uav", "full_cooperation"]
    last = None
    for mode in modes:
        c = dataclasses.replace(cfg, coop_mode=mode)
        traj0, q0 = initial_trajectory_and_coop(scenario, c)
        if trajectory is not None:
            traj0 = np.asarray(trajectory, float)
        if coop is not None:
            q0 = np.asarray(coop, bool)
        T = p.num_slots
        results = [solve_slot(traj0, q0, channels, scenario, qos, t, c) for t in range(1, T + 1)]
        if any(r.status != OPTIMAL for r in results):
            last = InitializationError(
                f"relaxation not solved with {mode} cooperation: " + ", ".join(r.status for r in results),
                constraint="C5/C6",
            )
            log.info("%s", last)
            continue
        w_data = np.stack([r.w_data for r in results], axis=2)
        w_fh = np.stack([r.w_fh for r in results], axis=1)
        slacks = construct_slacks(w_data, w_fh, traj0, q0, channels, scenario, qos, beta=beta, fixed_coop=fixed_coop)
        plan = Plan(w_data=w_data, w_fh=w_fh, trajectory=traj0, coop=q0, slacks=slacks)
        report = InitReport(
            coop_mode=mode,
            slot_status=[r.status for r in results],
            max_rank_ratio=max(r.max_ratio for r in results),
            randomized_slots=[t for t, r in enumerate(results, start=1) if r.randomized],
            relaxation_value=float(sum(r.relaxation_value for r in results)),
        )
        return plan, report
    raise last

