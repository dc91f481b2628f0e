"""Randomized experiment scenarios: physical parameters plus geometry.

All powers are in watts, distances in meters. dBm only appears at the CLI
boundary (see :func:`dbm_to_w`).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, PlacementError, ScenarioParseError

MAX_PLACEMENT_TRIES = 2000


def dbm_to_w(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def w_to_dbm(w):
    return 10.0 * np.log10(w) + 30.0


@dataclass(frozen=True)
class SimParams:
    """Physical and algorithmic parameters of one experiment.

    Defaults are the desk-scale sizes with the remaining values taken from the
    reference simulation table (2 MHz, 0.2 s slots, 46/40 dBm, ...).
    """

    bandwidth_hz: float = 2e6
    slot_duration_s: float = 0.2
    num_slots: int = 4
    num_blocks: int = 3
    num_uavs: int = 3
    num_users: int = 2
    bs_antennas: int = 6
    uav_antennas: int = 2
    p_bs_max: float = 10.0 ** 1.6          # 46 dBm
    p_uav_max: float = 10.0                # 40 dBm
    nav_c1: float = 1e-3                   # 0 dBm
    nav_c2: float = 0.1                    # 20 dBm per meter
    noise_psd: float = 10.0 ** -20.4       # -174 dBm/Hz
    max_speed: float = 10.0
    r_min_bps: float = 0.8e6
    d_min: float = 10.0
    rice_factor: float = 10.0 ** -0.3      # -3 dB
    pathloss_exponent_data: float = 2.5
    pathloss_exponent_fh: float = 2.0
    antenna_gain_data: float = 1e-3
    antenna_gain_fh: float = 1e-3
    beta: float = 1e3                      # 1e4 / p_uav_max
    alpha_0: float = 0.25
    alpha_uav: tuple = (0.25, 0.25, 0.25)

    def __post_init__(self):
        object.__setattr__(self, "alpha_uav", tuple(float(a) for a in self.alpha_uav))

    @property
    def d_max(self) -> float:
        return self.max_speed * self.slot_duration_s

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth_hz

    @property
    def r_min(self) -> float:
        """Per-user minimum rate in bit/s/Hz."""
        return self.r_min_bps / self.bandwidth_hz

    @classmethod
    def table1(cls, **overrides) -> "SimParams":
        """Full reference sizes: L=4, K=4, T=50, B=30, N=12, M=2."""
        base = dict(num_slots=50, num_blocks=30, num_uavs=4, num_users=4, bs_antennas=12, uav_antennas=2)
        base.update(overrides)
        return cls.with_equal_weights(**base)

    @classmethod
    def with_equal_weights(cls, **kwargs) -> "SimParams":
        """Build params with alpha_0 = alpha_l = 1/(L+1) and beta = 1e4/p_uav_max."""
        L = kwargs.get("num_uavs", cls.num_uavs)
        kwargs.setdefault("alpha_0", 1.0 / (L + 1))
        kwargs.setdefault("alpha_uav", (1.0 / (L + 1),) * L)
        kwargs.setdefault("beta", 1e4 / kwargs.get("p_uav_max", cls.p_uav_max))
        return cls(**kwargs)

    def replace(self, **changes) -> "SimParams":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        L, K = self.num_uavs, self.num_users
        for name in ("num_slots", "num_blocks", "num_uavs", "num_users", "bs_antennas", "uav_antennas"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        for name in (
            "bandwidth_hz", "slot_duration_s", "p_bs_max", "p_uav_max", "nav_c2", "noise_psd",
            "max_speed", "r_min_bps", "d_min", "rice_factor", "pathloss_exponent_data",
            "pathloss_exponent_fh", "antenna_gain_data", "antenna_gain_fh", "beta",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.nav_c1) and self.nav_c1 >= 0):
            raise ParameterError(f"nav_c1 must be >= 0, got {self.nav_c1!r}")
        if self.bs_antennas < L:
            raise ParameterError(f"need N >= L (N={self.bs_antennas}, L={L})")
        if L * self.uav_antennas < K:
            raise ParameterError(f"need L*M >= K (L={L}, M={self.uav_antennas}, K={K})")
        if len(self.alpha_uav) != L:
            raise ParameterError(f"alpha_uav has {len(self.alpha_uav)} entries, expected L={L}")
        weights = (self.alpha_0,) + self.alpha_uav
        if any(not (0.0 <= a <= 1.0) for a in weights):
            raise ParameterError("weights must lie in [0, 1]")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ParameterError(f"weights must sum to 1, got {sum(weights)!r}")


@dataclass(frozen=True)
class Layout:
    """Generation-time layout constants (ring of users, cylinder of UAVs)."""

    ring_inner: float = 500.0
    ring_outer: float = 1000.0
    height_min: float = 50.0
    height_max: float = 100.0
    user_height: float = 0.0
    bs_height: float = 25.0


def _arr(x):
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Geometry:
    bs_position: np.ndarray
    user_positions: np.ndarray
    uav_start_positions: np.ndarray
    nav_min: np.ndarray
    nav_max: np.ndarray
    ring_inner: float
    ring_outer: float
    height_min: float
    height_max: float

    def __post_init__(self):
        for name in ("bs_position", "user_positions", "uav_start_positions", "nav_min", "nav_max"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        for name in ("ring_inner", "ring_outer", "height_min", "height_max"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, Geometry):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in dataclasses.fields(self)
        )

    def with_starts(self, starts) -> "Geometry":
        return dataclasses.replace(self, uav_start_positions=starts)

    def validate(self, params: SimParams) -> None:
        L, K = params.num_uavs, params.num_users
        if self.bs_position.shape != (3,):
            raise ParameterError("bs_position must have shape (3,)")
        if self.user_positions.shape != (K, 3):
            raise ParameterError(f"user_positions must have shape ({K}, 3)")
        if self.uav_start_positions.shape != (L, 3):
            raise ParameterError(f"uav_start_positions must have shape ({L}, 3)")
        if self.nav_min.shape != (3,) or self.nav_max.shape != (3,) or np.any(self.nav_min > self.nav_max):
            raise ParameterError("nav_min/nav_max must be (3,) with nav_min <= nav_max")
        starts = self.uav_start_positions
        if np.any(starts < self.nav_min) or np.any(starts > self.nav_max):
            raise ParameterError("UAV start outside the navigation box")
        for i in range(L):
            for j in range(i + 1, L):
                if np.linalg.norm(starts[i] - starts[j]) < params.d_min:
                    raise ParameterError(f"UAV starts {i} and {j} closer than d_min")


@dataclass(frozen=True)
class Scenario:
    params: SimParams
    geometry: Geometry
    seed: int

    @property
    def L(self) -> int:
        return self.params.num_uavs

    @property
    def K(self) -> int:
        return self.params.num_users

    @property
    def T(self) -> int:
        return self.params.num_slots

    def with_starts(self, starts) -> "Scenario":
        return dataclasses.replace(self, geometry=self.geometry.with_starts(starts))

    def with_params(self, **changes) -> "Scenario":
        return dataclasses.replace(self, params=self.params.replace(**changes))


def _sample_users(rng, K, layout):
    users = np.empty((K, 3))
    r1sq, r2sq = layout.ring_inner ** 2, layout.ring_outer ** 2
    for k in range(K):
        while True:
            r = math.sqrt(rng.uniform(r1sq, r2sq))
            phi = rng.uniform(0.0, 2.0 * math.pi)
            x, y = r * math.cos(phi), r * math.sin(phi)
            # rounding can push a point a ulp outside the annulus; resample then
            if layout.ring_inner <= math.hypot(x, y) <= layout.ring_outer:
                break
        users[k] = (x, y, layout.user_height)
    return users


def _sample_uavs(rng, L, d_min, layout, nav_min, nav_max):
    starts = []
    tries = 0
    while len(starts) < L:
        if tries >= MAX_PLACEMENT_TRIES * L:
            raise PlacementError(
                f"could not place {L} UAVs at least {d_min} m apart after {tries} draws"
            )
        tries += 1
        r = layout.ring_outer * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        p = np.array([r * math.cos(phi), r * math.sin(phi), rng.uniform(layout.height_min, layout.height_max)])
        if np.any(p < nav_min) or np.any(p > nav_max):
            continue
        if all(np.linalg.norm(p - q) >= d_min for q in starts):
            starts.append(p)
    return np.array(starts)


def generate_scenario(params: SimParams, seed: int, layout: Layout | None = None) -> Scenario:
    """Sample users uniformly in the ring and UAV starts uniformly in the cylinder."""
    params.validate()
    layout = layout or Layout()
    if not (0 <= layout.ring_inner <= layout.ring_outer and layout.height_min <= layout.height_max):
        raise ParameterError("invalid layout radii or heights")
    rng = np.random.default_rng(seed)
    nav_min = np.array([-layout.ring_outer, -layout.ring_outer, layout.height_min])
    nav_max = np.array([layout.ring_outer, layout.ring_outer, layout.height_max])
    users = _sample_users(rng, params.num_users, layout)
    starts = _sample_uavs(rng, params.num_uavs, params.d_min, layout, nav_min, nav_max)
    geometry = Geometry(
        bs_position=[0.0, 0.0, layout.bs_height],
        user_positions=users,
        uav_start_positions=starts,
        nav_min=nav_min,
        nav_max=nav_max,
        ring_inner=layout.ring_inner,
        ring_outer=layout.ring_outer,
        height_min=layout.height_min,
        height_max=layout.height_max,
    )
    return Scenario(params=params, geometry=geometry, seed=int(seed))


# --- persistence -------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    params = dataclasses.asdict(s.params)
    params["alpha_uav"] = list(s.params.alpha_uav)
    geometry = {}
    for f in dataclasses.fields(s.geometry):
        value = getattr(s.geometry, f.name)
        geometry[f.name] = value.tolist() if isinstance(value, np.ndarray) else value
    return {"params": params, "geometry": geometry, "seed": s.seed}


def scenario_from_dict(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioParseError("top level must be an object", location="$")
    for section in ("params", "geometry", "seed"):
        if section not in data:
            raise ScenarioParseError(f"missing section {section!r}", location="$")
    raw_params, raw_geom = data["params"], data["geometry"]
    kwargs = {}
    for f in dataclasses.fields(SimParams):
        if f.name not in raw_params:
            raise ScenarioParseError("missing field", location=f"params.{f.name}")
        kwargs[f.name] = raw_params[f.name]
    unknown = set(raw_params) - set(kwargs)
    if unknown:
        raise ScenarioParseError(f"unknown fields {sorted(unknown)}", location="params")
    for name in ("num_slots", "num_blocks", "num_uavs", "num_users", "bs_antennas", "uav_antennas"):
        if not isinstance(kwargs[name], int):
            raise ScenarioParseError("expected an integer", location=f"params.{name}")
    params = SimParams(**kwargs)
    gkw = {}
    for f in dataclasses.fields(Geometry):
        if f.name not in raw_geom:
            raise ScenarioParseError("missing field", location=f"geometry.{f.name}")
        gkw[f.name] = raw_geom[f.name]
    try:
        geometry = Geometry(**gkw)
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(str(exc), location="geometry") from exc
    if not isinstance(data["seed"], int):
        raise ScenarioParseError("expected an integer", location="seed")
    params.validate()
    geometry.validate(params)
    return Scenario(params=params, geometry=geometry, seed=data["seed"])


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, location=f"{path}:{exc.lineno}:{exc.colno}") from exc
    return scenario_from_dict(data)
