import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavcoop.cone import ConeConstraint, Zero, solve
from uavcoop.dcp import (
    DC_IDS,
    assemble_subproblem,
    build_dc_set,
    coop_indicator,
    initial_point_vector,
    lemma1_bound,
    lift_matrix,
    lift_vector,
    neglog_tangent,
    quad_over_lin,
)
from uavcoop.errors import DomainError, LinearizationPointError
from uavcoop.model import objective
from uavcoop.sdr import initialize

finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def lemma_tuples(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    cn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    tau0 = draw(st.floats(1e-2, 1e2, **finite))
    tau = draw(st.floats(1e-2, 1e2, **finite))
    return cn(n, m), cn(n), tau0, cn(n), tau


def test_lifting_preserves_inner_products():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lhs = lift_matrix(G).T @ lift_vector(w)
    np.testing.assert_allclose(lhs, lift_vector(G.conj().T @ w), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(lemma_tuples())
def test_lemma1_minorant(tup):
    G, w0, tau0, w, tau = tup
    form = lemma1_bound(G, w0, tau0)
    f = quad_over_lin(G, w, tau)
    scale = 1.0 + abs(f) + abs(form(w, tau))
    assert form(w, tau) <= f + 1e-9 * scale
    assert form(w0, tau0) == pytest.approx(quad_over_lin(G, w0, tau0), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(lemma_tuples(), st.floats(0.0, 10.0, **finite))
def test_linearized_sublevel_set_is_inner(tup, f1):
    # any point satisfying f1 <= minorant also satisfies f1 <= f2
    G, w0, tau0, w, tau = tup
    form = lemma1_bound(G, w0, tau0)
    if f1 <= form(w, tau):
        assert f1 <= quad_over_lin(G, w, tau) + 1e-9 * (1 + f1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.999, **finite), st.floats(0.0, 0.999, **finite))
def test_neglog_tangent_underestimates(t0, t):
    val, slope = neglog_tangent(t0)
    assert val + slope * (t - t0) <= -math.log1p(-t) + 1e-12


def test_domain_errors():
    with pytest.raises(DomainError):
        lemma1_bound(np.ones(2), np.ones(2), 0.0)
    with pytest.raises(DomainError):
        neglog_tangent(1.0)


def test_coop_indicator():
    assert coop_indicator(1e3, np.zeros(2)) == 0.0
    assert coop_indicator(1e3, [1e-1, 0]) == pytest.approx(1 - math.exp(-10))


def test_constraint_counts(desk):
    s, ch, qos = desk
    L, K, T = s.L, s.K, s.T
    dc = build_dc_set(s, ch, qos)
    assert dc.count("C5a") == K * T
    assert dc.count("C5c") == L * K * T
    assert dc.count("C6a") == L * T
    assert dc.count("C6c") == L * K * T
    assert dc.count("C8") == T * L * (L - 1) // 2
    fixed = build_dc_set(s, ch, qos, fixed_coop=np.ones((L, K), bool))
    assert fixed.count("C6c") == 0
    assert set(c.id for c in dc.constraints) == set(DC_IDS)


def test_initial_point_satisfies_dc_set(desk):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    dc = build_dc_set(s, ch, qos)
    assert dc.satisfied(x0)
    for v in dc.convex_violations(x0).values():
        assert np.max(v) <= 1e-6


def _pinned(sub, x):
    """Subproblem with the primary variables fixed to x's coordinates."""
    prog = sub.program
    names = prog.var_names
    idx = np.concatenate([np.asarray(names[n]).ravel() for n in ("wd_re", "wd_im", "wf_re", "wf_im", "tau_d", "tau_f") if n in names])
    idx = idx[idx >= 0]
    m = len(idx)
    pin = ConeConstraint(np.arange(m), idx, np.ones(m), -x[idx], Zero(m), "pin")
    return type(prog)(prog.num_vars, prog.c, prog.c0, prog.constraints + [pin], prog.var_names)


@pytest.mark.parametrize("fixed_trajectory", [False, True])
def test_previous_iterate_is_feasible_for_subproblem(desk, fixed_trajectory):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    dc = build_dc_set(s, ch, qos, fixed_trajectory=x0.trajectory if fixed_trajectory else None)
    sub = assemble_subproblem(x0, dc)
    sol = solve(_pinned(sub, initial_point_vector(sub)))
    # x_prev sits on the boundary of C5a/C6a, so the pinned set has no interior;
    # the solver may stop short of "Optimal" but must return a feasible point
    assert sol.primal is not None
    assert sol.primal_residual <= 1e-5
    f0 = objective(x0, s).weighted_total
    assert sol.objective_value * sub.obj_scale == pytest.approx(f0, rel=1e-5)


def test_subproblem_decreases_and_keeps_dc_feasibility(desk):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    dc = build_dc_set(s, ch, qos)
    sub = assemble_subproblem(x0, dc)
    sol = solve(sub.program)
    x1 = sub.decode(sol.primal)
    assert objective(x1, s).weighted_total <= objective(x0, s).weighted_total * (1 + 1e-7)
    assert dc.max_violation(x1) <= 1e-6


def test_rotated_and_power_cone_forms_agree(desk):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    values = []
    for mode in ("auto", "power"):
        sub = assemble_subproblem(x0, build_dc_set(s, ch, qos, power_mode=mode))
        values.append(solve(sub.program).objective_value * sub.obj_scale)
    assert values[0] == pytest.approx(values[1], rel=1e-6)


def test_rejects_unusable_linearization_point(desk):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    dc = build_dc_set(s, ch, qos)
    with pytest.raises(LinearizationPointError):
        assemble_subproblem(x0.replace(slacks=None), dc)
    bad = x0.slacks.__class__(tau_data=-x0.slacks.tau_data, tau_fh=x0.slacks.tau_fh, tau_q=x0.slacks.tau_q)
    with pytest.raises(LinearizationPointError):
        assemble_subproblem(x0.replace(slacks=bad), dc)


def test_coincident_uavs_get_a_deterministic_direction(desk):
    s, ch, qos = desk
    x0, _ = initialize(s, ch, qos)
    traj = x0.trajectory.copy()
    traj[1, 1:] = traj[0, 1:]
    moved = x0.replace(trajectory=traj)
    dc = build_dc_set(s, ch, qos)
    a = assemble_subproblem(moved, dc).program
    b = assemble_subproblem(moved, dc).program
    np.testing.assert_array_equal(a.constraints[-1].vals, b.constraints[-1].vals)
    c8 = [con for con in a.constraints if con.name.startswith("C8[")]
    assert len(c8) == dc.count("C8")
