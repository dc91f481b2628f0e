"""Experiment runner: block loops with trajectory chaining, scheme comparison,
parameter sweeps and CSV/JSON result tables."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineId, baseline4_trajectory, run_baseline
from .ccp import CcpSettings, run
from .channel import draw_block
from .errors import ParameterError, UavCoopError
from .model import QosSpec, check_constraints, objective
from .scenario import Scenario, SimParams, generate_scenario, load_scenario, w_to_dbm

log = logging.getLogger(__name__)

PROPOSED = "Proposed"
SCHEMES = (PROPOSED,) + tuple(b.value for b in BaselineId)
SWEEPS = ("none", "uavs", "rmin")
AGGREGATE_BLOCK = -1


def parse_scheme(name) -> str:
    if str(name).strip().lower() == "proposed":
        return PROPOSED
    return BaselineId.parse(name).value


@dataclass(frozen=True)
class ExperimentConfig:
    params: SimParams = field(default_factory=SimParams.with_equal_weights)
    scenario_path: str | None = None
    schemes: tuple = (PROPOSED,)
    sweep: str = "none"
    sweep_values: tuple = ()
    seeds: tuple = (0,)
    ccp: CcpSettings = field(default_factory=CcpSettings)
    output: str | None = None
    timing: bool = False

    def validate(self) -> None:
        if not self.schemes:
            raise ParameterError("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ParameterError(f"unknown scheme {s!r}")
        if not self.seeds:
            raise ParameterError("at least one seed is required")
        if self.sweep not in SWEEPS:
            raise ParameterError(f"sweep must be one of {SWEEPS}")
        if self.sweep != "none":
            v = list(self.sweep_values)
            if not v:
                raise ParameterError("a sweep needs at least one value")
            if any(b <= a for a, b in zip(v, v[1:])):
                raise ParameterError("sweep values must be strictly increasing")
            if self.sweep == "uavs" and self.scenario_path is not None:
                raise ParameterError("a scenario file fixes L; it cannot be combined with a UAV sweep")
        self.params.validate()

    @property
    def points(self) -> list:
        return list(self.sweep_values) if self.sweep != "none" else [None]


@dataclass
class ResultRow:
    seed: int
    block: int
    scheme: str
    L: int
    K: int
    r_min: float                # bit/s
    bs_power_w: float           # slot averages from here on
    uav_tx_power_w: float       # summed over UAVs
    uav_nav_power_w: float      # summed over UAVs
    per_uav_avg_w: float
    weighted_total_w: float
    iterations: int
    converged: bool
    seconds: float


FIELDS = [f.name for f in dataclasses.fields(ResultRow)]
POWER_FIELDS = ("bs_power_w", "uav_tx_power_w", "uav_nav_power_w", "per_uav_avg_w", "weighted_total_w")
DBM_FIELDS = [f[:-2] + "_dbm" for f in POWER_FIELDS]


def _params_for(cfg: ExperimentConfig, point) -> SimParams:
    base = cfg.params
    if cfg.sweep == "uavs":
        kw = {f.name: getattr(base, f.name) for f in dataclasses.fields(base)}
        L = int(point)
        kw.update(num_uavs=L)
        kw.pop("alpha_0")
        kw.pop("alpha_uav")
        kw["bs_antennas"] = max(base.bs_antennas, L)
        return SimParams.with_equal_weights(**kw)
    if cfg.sweep == "rmin":
        return base.replace(r_min_bps=float(point))
    return base


def _scenario_for(cfg: ExperimentConfig, params: SimParams, seed: int) -> Scenario:
    if cfg.scenario_path is None:
        return generate_scenario(params, seed)
    s = load_scenario(cfg.scenario_path)
    if cfg.sweep == "rmin":
        s = s.with_params(r_min_bps=params.r_min_bps)
    return Scenario(params=s.params, geometry=s.geometry, seed=int(seed))


def _failed_row(seed, block, scheme, p: SimParams, seconds) -> ResultRow:
    nan = math.nan
    return ResultRow(seed, block, scheme, p.num_uavs, p.num_users, p.r_min_bps, nan, nan, nan, nan, nan, 0, False, seconds)


def _row(seed, block, scheme, scenario: Scenario, plan, trace, ok, seconds) -> ResultRow:
    p = scenario.params
    r = objective(plan, scenario)
    T = p.num_slots
    return ResultRow(
        seed=seed,
        block=block,
        scheme=scheme,
        L=p.num_uavs,
        K=p.num_users,
        r_min=p.r_min_bps,
        bs_power_w=float(np.mean(r.per_slot_bs)),
        uav_tx_power_w=float(np.sum(r.per_slot_uav_tx)) / T,
        uav_nav_power_w=float(np.sum(r.per_slot_uav_nav)) / T,
        per_uav_avg_w=r.per_uav_avg / T,
        weighted_total_w=r.weighted_total / T,
        iterations=trace.iterations,
        converged=bool(ok),
        seconds=seconds,
    )


def aggregate(rows: list) -> ResultRow:
    """Mean powers, summed iterations and seconds, converged only if all blocks did."""
    first = rows[0]
    means = {f: float(np.mean([getattr(r, f) for r in rows])) for f in POWER_FIELDS}
    return ResultRow(
        seed=first.seed,
        block=AGGREGATE_BLOCK,
        scheme=first.scheme,
        L=first.L,
        K=first.K,
        r_min=first.r_min,
        iterations=int(sum(r.iterations for r in rows)),
        converged=all(r.converged for r in rows),
        seconds=float(sum(r.seconds for r in rows)),
        **means,
    )


def run_scheme_blocks(scheme: str, scenario: Scenario, seed: int, settings: CcpSettings, timing=False) -> list:
    """Run one scheme over the scenario's B blocks, chaining positions."""
    p = scenario.params
    T, B = p.num_slots, p.num_blocks
    qos = QosSpec.from_params(p)
    g = scenario.geometry
    flight = None
    if scheme == BaselineId.FIXED_TRAJECTORY.value:
        flight = baseline4_trajectory(scenario, B, on_overspeed="cap")
    rows = []
    current = scenario
    for b in range(B):
        channels = draw_block(scenario, b)
        t0 = time.perf_counter()
        if flight is not None:
            current = current.with_starts(flight[:, b * T])
        try:
            if scheme == PROPOSED:
                plan, trace = run(current, channels, qos, settings)
            else:
                seg = None if flight is None else flight[:, b * T: (b + 1) * T + 1]
                plan, trace = run_baseline(scheme, current, channels, qos, settings, assignment_seed=[seed, b], trajectory=seg)
            ok = not trace.polish_failed and check_constraints(plan, channels, current, qos).ok
            if not trace.converged:
                ok = False
            seconds = time.perf_counter() - t0 if timing else 0.0
            rows.append(_row(seed, b, scheme, current, plan, trace, ok, seconds))
            nxt = np.clip(plan.trajectory[:, -1], g.nav_min, g.nav_max)
        except UavCoopError as err:
            log.warning("seed %s block %d %s failed: %s", seed, b, scheme, err)
            seconds = time.perf_counter() - t0 if timing else 0.0
            rows.append(_failed_row(seed, b, scheme, p, seconds))
            nxt = current.geometry.uav_start_positions
        current = current.with_starts(nxt)
    return rows


def run_experiment(cfg: ExperimentConfig) -> list:
    """Rows for every (seed, sweep point, scheme): one per block plus an aggregate."""
    cfg.validate()
    table = []
    for seed in cfg.seeds:
        for point in cfg.points:
            params = _params_for(cfg, point)
            scenario = _scenario_for(cfg, params, seed)
            for scheme in cfg.schemes:
                rows = run_scheme_blocks(scheme, scenario, seed, cfg.ccp, cfg.timing)
                table.extend(rows)
                table.append(aggregate(rows))
    order = {s: i for i, s in enumerate(SCHEMES)}
    table.sort(key=lambda r: (r.seed, r.L, r.r_min, order[r.scheme], r.block if r.block >= 0 else math.inf))
    return table


# --- emission ----------------------------------------------------------------------

def _dbm(w):
    return float(w_to_dbm(w)) if w > 0 else -math.inf


def row_dict(row: ResultRow, dbm=False) -> dict:
    d = dataclasses.asdict(row)
    if dbm:
        for f, name in zip(POWER_FIELDS, DBM_FIELDS):
            d[name] = _dbm(d[f])
    return d


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(table, path=None, dbm=False) -> str:
    header = FIELDS + (DBM_FIELDS if dbm else [])
    lines = [",".join(header)]
    for row in table:
        d = row_dict(row, dbm)
        lines.append(",".join(_fmt(d[h]) for h in header))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def emit_json(table, path=None, dbm=False) -> str:
    text = json.dumps([row_dict(r, dbm) for r in table], indent=1) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _coerce(d: dict) -> ResultRow:
    kw = {}
    for f in dataclasses.fields(ResultRow):
        v = d[f.name]
        if f.type in ("int",):
            v = int(v)
        elif f.type in ("float",):
            v = float(v)
        elif f.type in ("bool",):
            v = v if isinstance(v, bool) else str(v).lower() == "true"
        kw[f.name] = v
    return ResultRow(**kw)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return [_coerce(d) for d in csv.DictReader(fh)]


def read_json(path) -> list:
    with open(path) as fh:
        return [_coerce(d) for d in json.load(fh)]
