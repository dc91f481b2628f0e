"""Convex-concave procedure: start from a feasible point, repeatedly solve the
convex restriction around the current iterate, stop once the objective stops
dropping, then read off a binary cooperation pattern and polish."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelBlock
from .cone import NUMERICAL_LIMIT, OPTIMAL, SolverSettings, solve
from .dcp import assemble_subproblem, build_dc_set
from .errors import UavCoopError
from .model import Plan, QosSpec, objective
from .scenario import Scenario
from .sdr import InitConfig, initialize

log = logging.getLogger(__name__)

CONVERGED = "Converged"
MAX_ITERATIONS = "MaxIterations"
SOLVER_FAILURE = "SolverFailure"
ITERATE_TOL = 1e-6


@dataclass(frozen=True)
class CcpSettings:
    """Knobs of the CCP loop.

    ``epsilon`` and ``q_threshold`` default to values scaled by the instance:
    epsilon becomes 1e-3 f0(x0) and q_threshold 1e-3 times the weakest
    user's strongest beam power.
    """

    epsilon: float | None = None
    max_iters: int = 50
    beta: float | None = None
    q_threshold: float | None = None
    polish: bool = True
    power_mode: str = "auto"
    solver: SolverSettings = field(default_factory=SolverSettings)
    init: InitConfig = field(default_factory=InitConfig)

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be an integer >= 1")
        if self.q_threshold is not None and not self.q_threshold > 0:
            raise ValueError("q_threshold must be > 0")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    objective_w: float
    max_dc_violation: float
    status: str
    seconds: float


@dataclass
class CcpTrace:
    rows: list = field(default_factory=list)
    status: str = ""
    epsilon: float = math.nan
    polished: bool = False
    polish_failed: bool = False
    init_report: object = None

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective_w for r in self.rows])

    @property
    def iterations(self) -> int:
        """Number of subproblems solved (the init row does not count)."""
        return max(len(self.rows) - 1, 0)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "objective_w", "max_dc_violation", "status", "seconds"])
        for r in self.rows:
            w.writerow([r.iter, repr(r.objective_w), repr(r.max_dc_violation), r.status, f"{r.seconds:.6f}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def default_q_threshold(plan: Plan) -> float:
    peak = np.max(np.sum(np.abs(plan.w_data) ** 2, axis=3), axis=2)     # (L, K)
    strongest = np.max(peak, axis=0)                                       # per user
    ref = float(np.min(strongest)) if strongest.size else 0.0
    return 1e-3 * ref if ref > 0 else 1e-12


def extract_coop(plan: Plan, q_threshold: float):
    """Binary cooperation q[l, k] = max_t ||w_lkt||^2 > q_threshold.

    Returns ``(q, plan)`` where the plan has sub-threshold beams zeroed and
    ``coop`` set to q.
    """
    if not q_threshold > 0:
        raise ValueError("q_threshold must be > 0")
    peak = np.max(np.sum(np.abs(plan.w_data) ** 2, axis=3), axis=2)
    q = peak > q_threshold
    w = np.where(q[:, :, None, None], plan.w_data, 0.0)
    return q, plan.replace(w_data=w, coop=q)


def polish(plan: Plan, q, scenario: Scenario, channels: ChannelBlock, qos: QosSpec, cfg: InitConfig | None = None, beta=None):
    """Re-solve the beamforming relaxation with d and binary q fixed.

    Returns ``(plan, ok)``; on failure the input plan comes back with
    ``ok=False``.
    """
    q = np.asarray(q, bool)
    try:
        polished, _ = initialize(scenario, channels, qos, cfg, beta=beta, trajectory=plan.trajectory, coop=q)
    except UavCoopError as err:
        log.warning("polish failed, keeping the unpolished plan: %s", err)
        return plan.replace(coop=q), False
    return polished.replace(coop=q), True


def _accept(sol):
    return sol.primal is not None and sol.status in (OPTIMAL, NUMERICAL_LIMIT)


def run(scenario: Scenario, channels: ChannelBlock, qos: QosSpec, settings: CcpSettings | None = None, x0: Plan | None = None, fixed_coop=None, fixed_trajectory=False):
    """Algorithm driver. Returns ``(plan, trace)``.

    ``fixed_coop`` freezes q and ``fixed_trajectory`` freezes the positions of
    ``x0`` (or of the hover start); both are used by the baselines.
    """
    settings = settings or CcpSettings()
    p = scenario.params
    channels.check_dims(p)
    beta = settings.beta if settings.beta is not None else p.beta
    if beta != p.beta:
        scenario = scenario.with_params(beta=beta)
    trace = CcpTrace()

    t0 = time.perf_counter()
    if x0 is None:
        x0, trace.init_report = initialize(
            scenario, channels, qos, settings.init, beta=beta,
            coop=fixed_coop, fixed_coop=fixed_coop is not None,
        )
    dc = build_dc_set(
        scenario, channels, qos,
        fixed_coop=fixed_coop,
        fixed_trajectory=x0.trajectory if fixed_trajectory else None,
        power_mode=settings.power_mode,
    )
    f = objective(x0, scenario).weighted_total
    eps = settings.epsilon if settings.epsilon is not None else 1e-3 * f
    trace.epsilon = eps
    trace.rows.append(TraceRow(0, f, dc.max_violation(x0), "Init", time.perf_counter() - t0))

    x = x0
    trace.status = MAX_ITERATIONS
    for m in range(1, int(settings.max_iters) + 1):
        t0 = time.perf_counter()
        sub = assemble_subproblem(x, dc, scenario)
        sol = solve(sub.program, settings.solver)
        if not _accept(sol):
            trace.rows.append(TraceRow(m, math.nan, math.nan, sol.status, time.perf_counter() - t0))
            trace.status = SOLVER_FAILURE
            break
        x_new = sub.decode(sol.primal)
        viol = dc.max_violation(x_new)
        if sol.status != OPTIMAL and viol > ITERATE_TOL:
            trace.rows.append(TraceRow(m, math.nan, viol, sol.status, time.perf_counter() - t0))
            trace.status = SOLVER_FAILURE
            break
        f_new = objective(x_new, scenario).weighted_total
        trace.rows.append(TraceRow(m, f_new, viol, sol.status, time.perf_counter() - t0))
        decrease = f - f_new
        x, f = x_new, f_new
        if decrease <= eps:
            trace.status = CONVERGED
            break

    if settings.polish:
        thr = settings.q_threshold if settings.q_threshold is not None else default_q_threshold(x)
        if fixed_coop is not None:
            q = np.asarray(fixed_coop, bool)
        else:
            q, _ = extract_coop(x, thr)
        polished, ok = polish(x, q, scenario, channels, qos, settings.init, beta=beta)
        trace.polished, trace.polish_failed = ok, not ok
        x = polished
    return x, trace
