"""Difference-of-convex reformulation and the per-iteration convex subproblem.

The mixed-integer problem is turned into a continuous one by replacing the
cooperation indicator with ``Q(beta, w) = 1 - exp(-beta ||w||^2)`` and by
introducing slacks (see :class:`~uavcoop.model.SlackVars`). The non-convex
constraints then all read ``f1(x) - f2(x) <= 0`` with f1, f2 convex:

    C5a  1 + sum_l sum_j |g_lk^H w_ljt|^2 / (s2 tau_lkt)  <=  sum_l gamma_k |g_lk^H w_lkt|^2 / (s2 tau_lkt)
    C5c  rho_lkt  <=  d_lkt^a / A
    C6a  dF_lt^aF / AF + sum_{j!=l} ||G_l^H w_Fjt||^2 / s2  <=  ||G_l^H w_Flt||^2 / (s2 tauF_l)
    C6c  beta ||w_lkt||^2  <=  -ln(1 - tauq_lk)
    C8   d_min  <=  ||d_lt - d_jt||

and the convex ones are C1, C2, C5b (tau_lkt >= d_lkt^a / A), C6b
(log2(1 + tauF_l) >= sum_k R_k tauq_lk), C7 and C9. Each CCP iteration
replaces f2 by its first-order minorant at the previous iterate.

In C5a the interference terms (j != k) are divided by rho instead of tau.
tau only bounds the path gain from below, so a single slack would let a
solver inflate tau on a non-serving link and hide its interference; rho
bounds the gain from above, which makes C5a imply the original SINR
constraint at every iterate. With both slacks tight the two forms coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock
from .cone import (
    Affine,
    ConeBuilder,
    ConeProgram,
    Power,
    RotatedSecondOrder,
    SecondOrder,
    Exponential,
    affsum,
)
from .errors import DomainError, LinearizationPointError
from .model import Plan, QosSpec, SlackVars, link_distances, step_lengths
from .scenario import Scenario

__all__ = [
    "SlackVars",
    "coop_indicator",
    "AffineForm",
    "lemma1_bound",
    "quad_over_lin",
    "lift_matrix",
    "lift_vector",
    "neglog_tangent",
    "DcConstraint",
    "DcConstraintSet",
    "build_dc_set",
    "assemble_subproblem",
    "Subproblem",
    "default_beta",
]

TAU_Q_MAX = 1.0 - 1e-6
TAU_FH_FLOOR = 1e-4
RHO_MIN = 1e-6
C8_PERTURB = 1e-3
DC_IDS = ("C5a", "C5c", "C6a", "C6c", "C8")
CONVEX_IDS = ("C1", "C2", "C5b", "C6b", "C7", "C9")


def default_beta(p_uav_max: float) -> float:
    return 1e4 / p_uav_max


def coop_indicator(beta, w) -> float:
    """Smooth surrogate 1 - exp(-beta ||w||^2) of the indicator 'w != 0'."""
    return float(-np.expm1(-beta * np.sum(np.abs(np.asarray(w)) ** 2)))


# --- real lifting and the quadratic-over-linear minorant -----------------------------

def lift_matrix(G) -> np.ndarray:
    """[[Re G, -Im G], [Im G, Re G]] so that lift(G)^T lift(w) = lift(G^H w)."""
    G = np.atleast_2d(np.asarray(G, complex))
    return np.block([[G.real, -G.imag], [G.imag, G.real]])


def lift_vector(w) -> np.ndarray:
    w = np.asarray(w, complex).ravel()
    return np.concatenate([w.real, w.imag])


def quad_over_lin(G, w, tau) -> float:
    G = np.asarray(G, complex)
    if G.ndim == 1:
        G = G[:, None]
    return float(np.linalg.norm(G.conj().T @ np.asarray(w, complex)) ** 2 / tau)


@dataclass(frozen=True)
class AffineForm:
    """``coef_w . lift(w) + coef_tau * tau + const``."""

    coef_w: np.ndarray
    coef_tau: float
    const: float

    def __call__(self, w, tau) -> float:
        return float(self.coef_w @ lift_vector(w) + self.coef_tau * tau + self.const)


def lemma1_bound(G, w0, tau0) -> AffineForm:
    """Affine minorant of ||G^H w||^2 / tau that is tight at (w0, tau0).

    f(w0, tau0) + (w0~^T G~ G~^T / tau0) (2 w~ - ((tau + tau0) / tau0) w0~)
    """
    if not tau0 > 0:
        raise DomainError(f"tau0 must be positive, got {tau0!r}")
    G = np.asarray(G, complex)
    if G.ndim == 1:
        G = G[:, None]
    Gt = lift_matrix(G)
    w0t = lift_vector(w0)
    a = Gt @ (Gt.T @ w0t) / tau0            # G~ G~^T w0~ / tau0
    f0 = float(np.sum((Gt.T @ w0t) ** 2)) / tau0
    aw0 = float(a @ w0t)
    return AffineForm(coef_w=2.0 * a, coef_tau=-aw0 / tau0, const=f0 - aw0)


def neglog_tangent(tau0):
    """Tangent of -ln(1 - tau) at tau0 as (value, slope)."""
    if not (0.0 <= tau0 < 1.0):
        raise DomainError(f"tau_q must lie in [0, 1), got {tau0!r}")
    return -math.log1p(-tau0), 1.0 / (1.0 - tau0)


# --- the constraint catalog ---------------------------------------------------------

@dataclass(frozen=True)
class DcConstraint:
    id: str
    index: tuple


@dataclass
class DcConstraintSet:
    scenario: Scenario
    channels: ChannelBlock
    qos: QosSpec
    gamma: np.ndarray                       # gamma_k = 1 + 1/Gamma_k^min
    constraints: list                       # DC constraints, tagged
    convex_ids: tuple = CONVEX_IDS
    fixed_coop: np.ndarray | None = None
    fixed_trajectory: np.ndarray | None = None
    power_mode: str = "auto"

    def count(self, cid) -> int:
        return sum(1 for c in self.constraints if c.id == cid)

    # physical evaluation ------------------------------------------------
    def evaluate(self, plan: Plan) -> dict:
        """Return {id: (f1, f2)} arrays for every DC family present."""
        s = self.scenario
        p = s.params
        sigma2 = p.noise_power
        tau = plan.slacks
        if tau is None:
            raise ValueError("plan carries no slack variables")
        out = {}
        X = np.abs(np.einsum("lkm,ljtm->lkjt", self.channels.g_data.conj(), plan.w_data)) ** 2
        own = np.einsum("lkkt->lkt", X)
        others = np.sum(X, axis=2) - own
        f1 = 1.0 + np.sum(others / (sigma2 * tau.interference) + own / (sigma2 * tau.tau_data), axis=0)
        f2 = np.sum(self.gamma[None, :, None] * own / (sigma2 * tau.tau_data), axis=0)
        out["C5a"] = (f1, f2)                                   # (K, T)

        d, dF = link_distances(plan.trajectory, s)
        out["C5c"] = (tau.interference, d ** p.pathloss_exponent_data / p.antenna_gain_data)   # (L, K, T)

        rx2 = np.sum(np.abs(self.channels.g_fh_rx) ** 2, axis=1)
        Y = rx2[:, None, None] * np.abs(np.einsum("ln,jtn->ljt", self.channels.g_fh_tx.conj(), plan.w_fh)) ** 2
        L = Y.shape[0]
        mask = ~np.eye(L, dtype=bool)[:, :, None]
        f1 = dF ** p.pathloss_exponent_fh / p.antenna_gain_fh + np.sum(np.where(mask, Y, 0.0), axis=1) / sigma2
        f2 = np.einsum("llt->lt", Y) / (sigma2 * tau.tau_fh[:, None])
        out["C6a"] = (f1, f2)                                   # (L, T)

        if self.fixed_coop is None:
            f1 = p.beta * np.sum(np.abs(plan.w_data) ** 2, axis=3)
            f2 = np.broadcast_to(-np.log1p(-tau.tau_q)[:, :, None], f1.shape)
            out["C6c"] = (f1, f2)                               # (L, K, T)

        pos = plan.trajectory[:, 1:, :]
        pairs = [(l, j) for l in range(L) for j in range(l + 1, L)]
        f2 = np.array([[np.linalg.norm(pos[l, t] - pos[j, t]) for (l, j) in pairs] for t in range(pos.shape[1])])
        out["C8"] = (np.full(f2.shape, p.d_min), f2)            # (T, pairs)
        return out

    def violations(self, plan: Plan) -> dict:
        """Normalized (f1 - f2), positive where violated.

        C5a, C5c, C6a and C8 are divided by f1 (relative); C6c is already
        dimensionless and reported as is.
        """
        vals = self.evaluate(plan)
        out = {}
        for cid, (f1, f2) in vals.items():
            diff = f1 - f2
            out[cid] = diff if cid == "C6c" else diff / np.maximum(np.abs(f1), 1e-300)
        return out

    def max_violation(self, plan: Plan) -> float:
        worst = 0.0
        for v in self.violations(plan).values():
            if v.size:
                worst = max(worst, float(np.max(v)))
        return worst

    def satisfied(self, plan: Plan, tol=1e-6) -> bool:
        return self.max_violation(plan) <= tol

    def convex_violations(self, plan: Plan) -> dict:
        """Normalized violation (positive = violated) of the convex constraints."""
        s = self.scenario
        p = s.params
        g = s.geometry
        tau = plan.slacks
        bs = np.sum(np.abs(plan.w_fh) ** 2, axis=(0, 2))
        tx = np.sum(np.abs(plan.w_data) ** 2, axis=(1, 3))
        steps = step_lengths(plan.trajectory)
        nav = p.nav_c1 + p.nav_c2 * steps
        d, _ = link_distances(plan.trajectory, s)
        need = d ** p.pathloss_exponent_data / p.antenna_gain_data
        q = self.fixed_coop.astype(float) if self.fixed_coop is not None else tau.tau_q
        pos = plan.trajectory[:, 1:, :]
        return {
            "C1": (bs - p.p_bs_max) / p.p_bs_max,
            "C2": (tx + nav - p.p_uav_max) / p.p_uav_max,
            "C5b": (need - tau.tau_data) / need,
            "C6b": q @ self.qos.r_min - np.log2(1.0 + tau.tau_fh),
            "C7": (steps - p.d_max) / p.d_max,
            "C9": np.maximum(g.nav_min - pos, pos - g.nav_max).max(axis=-1),
        }


def build_dc_set(scenario: Scenario, channels: ChannelBlock, qos: QosSpec, fixed_coop=None, fixed_trajectory=None, power_mode="auto") -> DcConstraintSet:
    """Catalog of the DC constraints for one block.

    ``fixed_coop`` freezes q (the C6c family disappears and C6b uses q);
    ``fixed_trajectory`` freezes the UAV positions.
    """
    p = scenario.params
    L, K, T = p.num_uavs, p.num_users, p.num_slots
    channels.check_dims(p)
    cons = [DcConstraint("C5a", (k, t)) for k in range(K) for t in range(T)]
    cons += [DcConstraint("C5c", (l, k, t)) for l in range(L) for k in range(K) for t in range(T)]
    cons += [DcConstraint("C6a", (l, t)) for l in range(L) for t in range(T)]
    if fixed_coop is None:
        cons += [DcConstraint("C6c", (l, k, t)) for l in range(L) for k in range(K) for t in range(T)]
    cons += [DcConstraint("C8", (t, l, j)) for t in range(T) for l in range(L) for j in range(l + 1, L)]
    if power_mode not in ("auto", "power"):
        raise ValueError("power_mode must be 'auto' or 'power'")
    return DcConstraintSet(
        scenario=scenario,
        channels=channels,
        qos=qos,
        gamma=1.0 + 1.0 / qos.gamma_min,
        constraints=cons,
        fixed_coop=None if fixed_coop is None else np.asarray(fixed_coop, bool),
        fixed_trajectory=None if fixed_trajectory is None else np.asarray(fixed_trajectory, float),
        power_mode=power_mode,
    )


# --- subproblem assembly -------------------------------------------------------------

def _re_im(a, re_idx, im_idx):
    """Affine real and imaginary parts of a^H w for w = x + i y."""
    ar, ai = a.real, a.imag
    re = Affine(np.concatenate([re_idx, im_idx]), np.concatenate([ar, ai]))
    im = Affine(np.concatenate([im_idx, re_idx]), np.concatenate([ar, -ai]))
    return re, im


def _ref_power(w) -> float:
    pw = np.abs(w.reshape(-1, w.shape[-1])) ** 2
    per = pw.sum(axis=1)
    per = per[per > 0]
    return float(np.mean(per)) if per.size else 1.0


@dataclass
class Subproblem:
    """A convex subproblem plus everything needed to map a solution back."""

    program: ConeProgram
    x_prev: Plan
    scale_data: float
    scale_fh: float
    obj_scale: float
    tau_ref: np.ndarray
    tau_fh_ref: np.ndarray
    fixed_coop: np.ndarray | None
    fixed_trajectory: bool

    def decode(self, x) -> Plan:
        names = self.program.var_names
        prev = self.x_prev
        L, K, T, M, N = prev.shape
        x = np.asarray(x, float)

        def take(idx):
            idx = np.asarray(idx)
            out = np.zeros(idx.shape)
            ok = idx >= 0
            out[ok] = x[idx[ok]]
            return out

        w_data = self.scale_data * (take(names["wd_re"]) + 1j * take(names["wd_im"]))
        w_fh = self.scale_fh * (take(names["wf_re"]) + 1j * take(names["wf_im"]))
        traj = prev.trajectory.copy()
        if not self.fixed_trajectory:
            traj[:, 1:, :] = prev.trajectory[:, 1:, :] + take(names["delta"])
        tau_data = self.tau_ref * take(names["tau_d"])
        tau_int = self.tau_ref * take(names["rho"]) if "rho" in names else self.tau_ref.copy()
        tau_fh = self.tau_fh_ref * take(names["tau_f"])
        if self.fixed_coop is None:
            tau_q = np.clip(take(names["tau_q"]), 0.0, TAU_Q_MAX)
        else:
            tau_q = self.fixed_coop.astype(float)
        slacks = SlackVars(tau_data=tau_data, tau_fh=tau_fh, tau_q=tau_q, tau_int=tau_int)
        return Plan(w_data=w_data, w_fh=w_fh, trajectory=traj, coop=prev.coop, slacks=slacks)


def _c8_direction(x0, l, j, t, d_min):
    n0 = float(np.linalg.norm(x0))
    if n0 > 0:
        return x0, n0
    # coincident UAVs: any subgradient is valid; pick a reproducible one
    rng = np.random.default_rng([l, j, t])
    v = rng.standard_normal(3)
    x0 = C8_PERTURB * d_min * v / np.linalg.norm(v)
    return x0, float(np.linalg.norm(x0))


def assemble_subproblem(x_prev: Plan, dc: DcConstraintSet, scenario: Scenario | None = None) -> Subproblem:
    """Convex restriction of the DC problem around ``x_prev``.

    Internally every variable is rescaled around ``x_prev`` (beamformers by a
    reference amplitude, slacks and distances by their previous values,
    positions as offsets) so that the cone program is well conditioned.
    """
    s = scenario or dc.scenario
    p = s.params
    ch = dc.channels
    L, K, T, M, N = x_prev.shape
    tau = x_prev.slacks
    if tau is None:
        raise LinearizationPointError("x_prev carries no slack variables")
    if np.any(tau.tau_data <= 0) or np.any(tau.tau_fh <= 0):
        raise LinearizationPointError("slack variables must be positive at the linearization point")
    if dc.fixed_coop is None and (np.any(tau.tau_q < 0) or np.any(tau.tau_q >= 1)):
        raise LinearizationPointError("tau_q must lie in [0, 1) at the linearization point")

    sigma2 = p.noise_power
    alpha_d, alpha_f = p.pathloss_exponent_data, p.pathloss_exponent_fh
    fixed_q = dc.fixed_coop
    fixed_traj = dc.fixed_trajectory is not None
    active = np.ones((L, K), bool) if fixed_q is None else fixed_q

    sd2 = _ref_power(x_prev.w_data)
    sf2 = _ref_power(x_prev.w_fh)
    sd, sf = math.sqrt(sd2), math.sqrt(sf2)
    obj_scale = sd2

    pos_prev = x_prev.trajectory[:, 1:, :]                  # (L, T, 3)
    users = s.geometry.user_positions
    bs_pos = s.geometry.bs_position
    r_prev = np.linalg.norm(pos_prev[:, None, :, :] - users[None, :, None, :], axis=-1)   # (L, K, T)
    rF_prev = np.linalg.norm(pos_prev - bs_pos, axis=-1)                                   # (L, T)
    tau_ref = r_prev ** alpha_d / p.antenna_gain_data
    tau0 = tau.tau_data / tau_ref
    if np.any(tau.interference <= 0):
        raise LinearizationPointError("interference slack must be positive at the linearization point")
    tauF_ref = tau.tau_fh.copy()
    D = rF_prev ** alpha_f / p.antenna_gain_fh

    b = ConeBuilder()
    wd_re = np.full((L, K, T, M), -1, np.int64)
    wd_im = np.full((L, K, T, M), -1, np.int64)
    n_active = int(active.sum())
    if n_active:
        re = b.var("_wd_re", (n_active, T, M))
        im = b.var("_wd_im", (n_active, T, M))
        wd_re[active] = re
        wd_im[active] = im
    b.var_names["wd_re"] = wd_re
    b.var_names["wd_im"] = wd_im
    wf_re = b.var("wf_re", (L, T, N))
    wf_im = b.var("wf_im", (L, T, N))
    delta = None if fixed_traj else b.var("delta", (L, T, 3))
    tau_d = b.var("tau_d", (L, K, T))
    rho = None if fixed_traj else b.var("rho", (L, K, T))
    tau_f = b.var("tau_f", (L,))
    tau_q = b.var("tau_q", (L, K)) if fixed_q is None else None
    P = b.var("p_uav", (L, T))
    PB = b.var("p_bs", (T,))
    nav = None if fixed_traj else b.var("nav", (L, T))

    def pos_expr(l, t, axis):
        """Position coordinate of UAV l in slot t (1-based), as affine expression."""
        base = x_prev.trajectory[l, t, axis]
        if t == 0 or delta is None:
            return Affine(const=base)
        return Affine.var(delta[l, t - 1, axis]) + base

    # objective: epigraph variables for the transmit powers, nav for motion
    obj = []
    const = 0.0
    for t in range(T):
        obj.append(Affine.var(PB[t], p.alpha_0 * sf2 / obj_scale))
        for l in range(L):
            obj.append(Affine.var(P[l, t], p.alpha_uav[l] * sd2 / obj_scale))
            const += p.alpha_uav[l] * p.nav_c1 / obj_scale
            if nav is not None:
                obj.append(Affine.var(nav[l, t], p.alpha_uav[l] * p.nav_c2 / obj_scale))
    if fixed_traj:
        steps = step_lengths(x_prev.trajectory)
        const += float(np.sum(np.asarray(p.alpha_uav)[:, None] * p.nav_c2 * steps)) / obj_scale
    b.minimize(affsum(obj) + const)

    # power epigraphs, C1, C2
    for t in range(T):
        z = [Affine.var(i) for i in np.concatenate([wf_re[:, t, :].ravel(), wf_im[:, t, :].ravel()])]
        b.add([Affine.var(PB[t]), 0.5] + z, RotatedSecondOrder(2 + len(z)), f"p_bs[{t}]")
        b.nonneg(1.0 - Affine.var(PB[t], sf2 / p.p_bs_max), f"C1[{t}]")
        for l in range(L):
            idx = np.concatenate([wd_re[l, :, t, :].ravel(), wd_im[l, :, t, :].ravel()])
            z = [Affine.var(i) for i in idx[idx >= 0]]
            b.add([Affine.var(P[l, t]), 0.5] + z, RotatedSecondOrder(2 + len(z)), f"p_uav[{l},{t}]")
            c2 = 1.0 - Affine.var(P[l, t], sd2 / p.p_uav_max) - p.nav_c1 / p.p_uav_max
            if nav is not None:
                c2 = c2 - Affine.var(nav[l, t], p.nav_c2 / p.p_uav_max)
            else:
                c2 = c2 - p.nav_c2 * steps[l, t] / p.p_uav_max
            b.nonneg(c2, f"C2[{l},{t}]")

    # navigation: epigraph of step length, C7, C9, linearized C8
    if not fixed_traj:
        for l in range(L):
            for t in range(1, T + 1):
                diff = [pos_expr(l, t, a) - pos_expr(l, t - 1, a) for a in range(3)]
                b.add([Affine.var(nav[l, t - 1])] + diff, SecondOrder(4), f"nav[{l},{t}]")
                b.nonneg(1.0 - Affine.var(nav[l, t - 1], 1.0 / p.d_max), f"C7[{l},{t}]")
                for a in range(3):
                    span = max(s.geometry.nav_max[a] - s.geometry.nav_min[a], 1.0)
                    b.nonneg((pos_expr(l, t, a) - s.geometry.nav_min[a]) / span, f"C9lo[{l},{t},{a}]")
                    b.nonneg((s.geometry.nav_max[a] - pos_expr(l, t, a)) / span, f"C9hi[{l},{t},{a}]")
        for t in range(1, T + 1):
            for l in range(L):
                for j in range(l + 1, L):
                    x0, n0 = _c8_direction(pos_prev[l, t - 1] - pos_prev[j, t - 1], l, j, t, p.d_min)
                    u = x0 / n0
                    # ||x|| >= u.x  with equality at x0
                    lin = affsum([(pos_expr(l, t, a) - pos_expr(j, t, a)) * u[a] for a in range(3)])
                    b.nonneg((lin - p.d_min) / p.d_min, f"C8[{t},{l},{j}]")

    use_rsoc = lambda alpha: dc.power_mode == "auto" and alpha == 2.0

    def power_epigraph(upper, base, alpha, name):
        """upper >= base^alpha for alpha >= 1 (both scaled to O(1))."""
        if use_rsoc(alpha):
            b.add([upper, 0.5, base], RotatedSecondOrder(3), name)
        else:
            b.add([upper, 1.0, base], Power(1.0 / alpha), name)

    # C5b: tau_lkt >= d^alpha / A, via distance epigraph composed with a power cone
    for l in range(L):
        for k in range(K):
            for t in range(T):
                tv = Affine.var(tau_d[l, k, t])
                if fixed_traj:
                    b.nonneg(tv - 1.0, f"C5b[{l},{k},{t}]")
                    continue
                r = b.var(f"_r[{l},{k},{t}]")
                rn = r_prev[l, k, t]
                diff = [(pos_expr(l, t + 1, a) - users[k, a]) / rn for a in range(3)]
                b.add([Affine.var(r)] + diff, SecondOrder(4), f"dist[{l},{k},{t}]")
                power_epigraph(tv, Affine.var(r), alpha_d, f"C5b[{l},{k},{t}]")
                # C5c: rho <= tangent of d^alpha / A, normalized by its value at x_prev
                x0 = pos_prev[l, t] - users[k]
                grad = alpha_d * x0 / rn ** 2
                tangent = affsum([(pos_expr(l, t + 1, a) - pos_prev[l, t, a]) * grad[a] for a in range(3)]) + 1.0
                b.nonneg(tangent - Affine.var(rho[l, k, t]), f"C5c[{l},{k},{t}]")
                b.nonneg(Affine.var(rho[l, k, t]) - RHO_MIN, f"rho_lo[{l},{k},{t}]")

    # C5a: 1 + sum_l u_lkt <= sum_l minorant of the signal term
    gamma = dc.gamma
    for k in range(K):
        for t in range(T):
            lhs = [Affine(const=1.0)]
            rhs = []
            for l in range(L):
                g = ch.g_data[l, k]
                c = sd2 / (sigma2 * tau_ref[l, k, t])
                links = [j for j in range(K) if active[l, j] and j != k]
                if links:
                    u = b.var(f"_u[{l},{k},{t}]")
                    z = []
                    for j in links:
                        re, im = _re_im(g, wd_re[l, j, t], wd_im[l, j, t])
                        z += [re * math.sqrt(c), im * math.sqrt(c)]
                    # interference over rho; with a frozen trajectory rho is the exact value
                    den = Affine(const=0.5) if rho is None else Affine.var(rho[l, k, t], 0.5)
                    b.add([Affine.var(u), den] + z, RotatedSecondOrder(2 + len(z)), f"C5a_int[{l},{k},{t}]")
                    lhs.append(Affine.var(u))
                if active[l, k]:
                    v = b.var(f"_s[{l},{k},{t}]")
                    re, im = _re_im(g, wd_re[l, k, t], wd_im[l, k, t])
                    z = [re * math.sqrt(c), im * math.sqrt(c)]
                    b.add([Affine.var(v), Affine.var(tau_d[l, k, t], 0.5)] + z, RotatedSecondOrder(4), f"C5a_sig[{l},{k},{t}]")
                    lhs.append(Affine.var(v))
                    w0 = x_prev.w_data[l, k, t] / sd
                    form = lemma1_bound(math.sqrt(gamma[k] * c) * g, w0, tau0[l, k, t])
                    idx = np.concatenate([wd_re[l, k, t], wd_im[l, k, t]])
                    rhs.append(Affine(idx, form.coef_w, form.const) + Affine.var(tau_d[l, k, t], form.coef_tau))
            b.nonneg(affsum(rhs) - affsum(lhs), f"C5a[{k},{t}]")

    # C6a: fronthaul path loss + interference <= minorant of own signal
    rx2 = np.sum(np.abs(ch.g_fh_rx) ** 2, axis=1)
    for l in range(L):
        G = np.outer(ch.g_fh_tx[l], ch.g_fh_rx[l].conj())
        for t in range(T):
            parts = []
            if fixed_traj:
                parts.append(Affine(const=1.0))
            else:
                rF = b.var(f"_rF[{l},{t}]")
                v = b.var(f"_v[{l},{t}]")
                diff = [(pos_expr(l, t + 1, a) - bs_pos[a]) / rF_prev[l, t] for a in range(3)]
                b.add([Affine.var(rF)] + diff, SecondOrder(4), f"distF[{l},{t}]")
                power_epigraph(Affine.var(v), Affine.var(rF), alpha_f, f"pathF[{l},{t}]")
                parts.append(Affine.var(v))
            cF = sf2 / (sigma2 * D[l, t])
            others = [j for j in range(L) if j != l]
            if others:
                i_var = b.var(f"_i[{l},{t}]")
                z = []
                for j in others:
                    re, im = _re_im(ch.g_fh_tx[l], wf_re[j, t], wf_im[j, t])
                    scale = math.sqrt(cF * rx2[l])
                    z += [re * scale, im * scale]
                b.add([Affine.var(i_var), 0.5] + z, RotatedSecondOrder(2 + len(z)), f"C6a_int[{l},{t}]")
                parts.append(Affine.var(i_var))
            w0 = x_prev.w_fh[l, t] / sf
            form = lemma1_bound(math.sqrt(cF / tauF_ref[l]) * G, w0, 1.0)
            idx = np.concatenate([wf_re[l, t], wf_im[l, t]])
            minorant = Affine(idx, form.coef_w, form.const) + Affine.var(tau_f[l], form.coef_tau)
            b.nonneg(minorant - affsum(parts), f"C6a[{l},{t}]")

    # C6b: ln(1 + tauF) >= ln2 * sum_k R_k tauq  (exponential cone)
    for l in range(L):
        if fixed_q is None:
            need = affsum([Affine.var(tau_q[l, k], math.log(2.0) * dc.qos.r_min[k]) for k in range(K)])
        else:
            need = Affine(const=math.log(2.0) * float(fixed_q[l].astype(float) @ dc.qos.r_min))
        b.add([need, 1.0, Affine.var(tau_f[l], tauF_ref[l]) + 1.0], Exponential(), f"C6b[{l}]")
        b.nonneg(Affine.var(tau_f[l], tauF_ref[l]) - TAU_FH_FLOOR, f"tauF_floor[{l}]")

    # C6c: beta ||w||^2 <= tangent of -ln(1 - tau_q), plus the tau_q box
    if fixed_q is None:
        for l in range(L):
            for k in range(K):
                val, slope = neglog_tangent(float(tau.tau_q[l, k]))
                rhs = Affine.var(tau_q[l, k], slope) + (val - slope * float(tau.tau_q[l, k]))
                b.nonneg(Affine.var(tau_q[l, k]), f"tauq_lo[{l},{k}]")
                b.nonneg(TAU_Q_MAX - Affine.var(tau_q[l, k]), f"tauq_hi[{l},{k}]")
                for t in range(T):
                    z = [Affine.var(i, math.sqrt(p.beta) * sd) for i in np.concatenate([wd_re[l, k, t], wd_im[l, k, t]])]
                    b.add([rhs, 0.5] + z, RotatedSecondOrder(2 + len(z)), f"C6c[{l},{k},{t}]")

    return Subproblem(
        program=b.build(),
        x_prev=x_prev,
        scale_data=sd,
        scale_fh=sf,
        obj_scale=obj_scale,
        tau_ref=tau_ref,
        tau_fh_ref=tauF_ref,
        fixed_coop=fixed_q,
        fixed_trajectory=fixed_traj,
    )


def initial_point_vector(sub: Subproblem) -> np.ndarray:
    """Coordinates of ``x_prev`` in the subproblem's variables (auxiliaries tight)."""
    prog = sub.program
    prev = sub.x_prev
    x = np.zeros(prog.num_vars)
    names = prog.var_names

    def put(idx, val):
        idx = np.asarray(idx)
        ok = idx >= 0
        x[idx[ok]] = np.broadcast_to(val, idx.shape)[ok]

    put(names["wd_re"], prev.w_data.real / sub.scale_data)
    put(names["wd_im"], prev.w_data.imag / sub.scale_data)
    put(names["wf_re"], prev.w_fh.real / sub.scale_fh)
    put(names["wf_im"], prev.w_fh.imag / sub.scale_fh)
    if "delta" in names:
        put(names["delta"], 0.0)
    put(names["tau_d"], prev.slacks.tau_data / sub.tau_ref)
    if "rho" in names:
        put(names["rho"], prev.slacks.interference / sub.tau_ref)
    put(names["tau_f"], prev.slacks.tau_fh / sub.tau_fh_ref)
    if "tau_q" in names:
        put(names["tau_q"], prev.slacks.tau_q)
    return x
