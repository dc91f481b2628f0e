"""Acceptance suite. Each test records one PASS/FAIL line (shown in the
terminal summary) and then asserts, so a failing criterion also fails pytest.

Desk scale: L=3, K=2, T=4, N=6, M=2. Runs that only need one CCP solve per
seed use the first channel block of each seed.
"""

import time

import numpy as np
import pytest

from uavcoop.baselines import BaselineId, run_baseline
from uavcoop.ccp import run
from uavcoop.channel import draw_block
from uavcoop.cli import main
from uavcoop.dcp import build_dc_set, lemma1_bound, quad_over_lin
from uavcoop.harness import AGGREGATE_BLOCK, PROPOSED, ExperimentConfig, run_experiment
from uavcoop.model import Plan, QosSpec, SlackVars, check_constraints, constraint_slacks, objective, path_gains
from uavcoop.scenario import SimParams, generate_scenario
from uavcoop.sdr import initialize

from conftest import load_micro

SEEDS = range(10)
SOLVER_TOL = 1e-8                # default absolute/relative solver tolerance
DESK = SimParams.with_equal_weights(num_blocks=1)


@pytest.fixture(scope="module")
def desk_runs():
    """Proposed scheme and all baselines on 10 seeds (one block each)."""
    t0 = time.perf_counter()
    qos = QosSpec.from_params(DESK)
    out = {}
    for seed in SEEDS:
        s = generate_scenario(DESK, seed)
        ch = draw_block(s, 0)
        runs = {PROPOSED: run(s, ch, qos)}
        for bid in BaselineId:
            runs[bid.value] = run_baseline(bid, s, ch, qos, assignment_seed=[seed, 0])
        out[seed] = (s, ch, qos, runs)
    return out, time.perf_counter() - t0


def test_c1_monotone_descent(desk_runs, verdict):
    runs, seconds = desk_runs
    worst_rise, max_iters, bad = 0.0, 0, []
    for seed, (s, ch, qos, by_scheme) in runs.items():
        _, trace = by_scheme[PROPOSED]
        obj = trace.objectives
        rise = np.diff(obj) / obj[:-1]
        worst_rise = max(worst_rise, float(np.max(rise, initial=0.0)))
        max_iters = max(max_iters, trace.iterations)
        if np.any(rise > 10 * SOLVER_TOL) or trace.iterations > 50:
            bad.append(seed)
    ok = not bad and seconds <= 15 * 60
    verdict(1, "monotone descent", ok,
            f"worst relative rise {worst_rise:.1e} (limit {10 * SOLVER_TOL:.0e}), max {max_iters} iterations, "
            f"{seconds:.1f} s for all schemes on 10 seeds, failing seeds {bad}")
    assert ok


def test_c2_iterate_feasibility(desk_runs, verdict):
    runs, _ = desk_runs
    worst = 0.0
    for s, ch, qos, by_scheme in runs.values():
        for _, trace in by_scheme.values():
            worst = max(worst, max(r.max_dc_violation for r in trace.rows if np.isfinite(r.max_dc_violation)))
    ok = worst <= 1e-6
    verdict(2, "iterate feasibility", ok, f"largest DC violation over all iterates of all runs {worst:.2e} (limit 1e-6)")
    assert ok


def test_c3_minorant_oracle(verdict):
    rng = np.random.default_rng(2024)
    cn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    worst_gap, worst_anchor = -np.inf, 0.0
    for _ in range(1000):
        n, m = rng.integers(1, 5, size=2)
        G, w0, w = cn(n, m), cn(n), cn(n)
        tau0, tau = rng.uniform(0.1, 10.0, size=2)
        form = lemma1_bound(G, w0, tau0)
        worst_gap = max(worst_gap, form(w, tau) - quad_over_lin(G, w, tau))
        worst_anchor = max(worst_anchor, abs(form(w0, tau0) - quad_over_lin(G, w0, tau0)))
    ok = worst_gap <= 1e-9 and worst_anchor <= 1e-9
    verdict(3, "quadratic-over-linear minorant oracle", ok, f"max(bound - f) {worst_gap:.2e}, max anchor error {worst_anchor:.2e} over 1000 tuples")
    assert ok


def test_c4_sdr_rank_one(verdict):
    worst, fallbacks = 0.0, []
    for seed in range(20):
        s = generate_scenario(DESK, seed)
        _, report = initialize(s, draw_block(s, 0), QosSpec.from_params(DESK))
        worst = max(worst, report.max_rank_ratio)
        if report.randomized_slots:
            fallbacks.append(seed)
    ok = worst <= 1e-6 and not fallbacks
    verdict(4, "SDR rank one", ok, f"max eigenvalue ratio {worst:.2e} over 20 seeds, randomization fallbacks on seeds {fallbacks}")
    assert ok


def test_c5_end_to_end_qos(desk_runs, verdict):
    runs, _ = desk_runs
    bad = []
    for seed, (s, ch, qos, by_scheme) in runs.items():
        for scheme, (plan, _) in by_scheme.items():
            rep = check_constraints(plan, ch, s, qos, tol=1e-6)
            if not rep.ok:
                bad.append((seed, scheme, rep.violated()))
    ok = not bad
    verdict(5, "end-to-end QoS", ok, f"{len(runs) * 5} polished plans checked, failures {bad}")
    assert ok


def test_c6_micro_instance_oracle(verdict):
    s, ch, raw = load_micro()
    plan, trace = run(s, ch, QosSpec.from_params(s.params))
    value = objective(plan, s).weighted_total
    grid = raw["grid_optimum_weighted_total_w"]
    ok = value <= grid * 1.10
    verdict(6, "micro-instance oracle", ok, f"CCP {value:.6e} W vs grid optimum {grid:.6e} W (ratio {value / grid:.4f}, limit 1.10)")
    assert ok


def test_c7_rate_trend(verdict):
    rates = (4e5, 8e5, 12e5, 16e5)
    cfg = ExperimentConfig(params=SimParams.with_equal_weights(), sweep="rmin", sweep_values=rates, seeds=tuple(range(5)))
    table = [r for r in run_experiment(cfg) if r.block == AGGREGATE_BLOCK]
    means = np.array([np.mean([r.weighted_total_w for r in table if r.r_min == v]) for v in rates])
    drops = (means[:-1] - means[1:]) / means[:-1]
    inversions = drops[drops > 0]
    ok = len(inversions) == 0 or (len(inversions) == 1 and inversions[0] <= 0.01)
    verdict(7, "rate trend", ok, "mean weighted total per slot " + ", ".join(f"{m:.4e}" for m in means) + f" W, inversions {list(np.round(inversions, 4))}")
    assert ok


def test_c8_cooperation_benefit(desk_runs, verdict):
    runs, _ = desk_runs
    b1 = BaselineId.COORDINATED_BEAMFORMING.value
    uav = {PROPOSED: [], b1: []}
    bs = {PROPOSED: [], b1: []}
    for s, ch, qos, by_scheme in runs.values():
        for scheme in (PROPOSED, b1):
            r = objective(by_scheme[scheme][0], s)
            uav[scheme].append(r.per_uav_avg / s.T)
            bs[scheme].append(r.bs_total / s.T)
    u_p, u_b = np.mean(uav[PROPOSED]), np.mean(uav[b1])
    f_p, f_b = np.mean(bs[PROPOSED]), np.mean(bs[b1])
    ok_uav, ok_bs = u_p <= u_b, f_b <= f_p
    verdict(8, "cooperation benefit", ok_uav and ok_bs,
            f"per-UAV power proposed {u_p:.4e} vs baseline 1 {u_b:.4e} W ({'ok' if ok_uav else 'violated'}); "
            f"BS fronthaul baseline 1 {f_b:.4e} vs proposed {f_p:.4e} W ({'ok' if ok_bs else 'violated'})")
    assert ok_uav and ok_bs


def _tight_point(s, ch, qos, rng):
    """Random plan with full cooperation and slacks set to their tight values."""
    p, g = s.params, s.geometry
    L, K, T, M, N = p.num_uavs, p.num_users, p.num_slots, p.uav_antennas, p.bs_antennas
    cn = lambda *shape: rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    traj = np.empty((L, T + 1, 3))
    traj[:, 0] = g.uav_start_positions
    traj[:, 1:] = rng.uniform(g.nav_min, g.nav_max, (L, T, 3))
    q = np.ones((L, K), bool)
    w = cn(L, K, T, M) * np.sqrt(10.0 ** rng.uniform(-6, -2, (L, K, T, 1)))
    wf = cn(L, T, N) * np.sqrt(10.0 ** rng.uniform(-10, -4, (L, T, 1)))
    tau = 1.0 / path_gains(traj, s)[0]
    slacks = SlackVars(tau_data=tau, tau_fh=qos.fronthaul_target(q), tau_q=np.zeros((L, K)), tau_int=tau.copy())
    return Plan(w_data=w, w_fh=wf, trajectory=traj, coop=q, slacks=slacks)


def test_c9_equivalence_anchor(verdict):
    s = generate_scenario(DESK, 0)
    ch = draw_block(s, 0)
    qos = QosSpec.from_params(DESK)
    dc = build_dc_set(s, ch, qos)
    rng = np.random.default_rng(99)
    mismatches, held, total = 0, 0, 0
    for _ in range(200):
        plan = _tight_point(s, ch, qos, rng)
        orig = constraint_slacks(plan, ch, s, qos)
        viol = dc.violations(plan)
        for cid, dcid in (("C5", "C5a"), ("C6", "C6a")):
            a = orig[cid] >= 0
            b = viol[dcid] <= 0
            mismatches += int(np.sum(a != b))
            held += int(np.sum(a))
            total += a.size
    ok = mismatches == 0
    verdict(9, "equivalence anchor", ok, f"{mismatches} disagreements over {total} C5/C6 instances on 200 points ({held} satisfied)")
    assert ok


def test_c10_reproducibility(tmp_path, verdict):
    args = ["sweep-rate", "--seed", "0,1", "--blocks", "1", "--scheme", "Proposed,b1,b3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    ok = a.read_bytes() == b.read_bytes()
    verdict(10, "reproducibility", ok, f"two sweep-rate runs, {len(a.read_bytes())} bytes each, identical={ok}")
    assert ok
