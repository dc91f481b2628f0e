"""Block-fading small-scale channels and distance-dependent link gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularityError
from .scenario import Scenario, SimParams


@dataclass(frozen=True, eq=False)
class ChannelBlock:
    """Small-scale fading for one block of T slots.

    g_data[l, k] is the length-M fading vector between UAV l and user k; the
    fronthaul matrix of UAV l factors as g_fh_tx[l] g_fh_rx[l]^H.
    """

    g_data: np.ndarray      # (L, K, M) complex
    g_fh_tx: np.ndarray     # (L, N) complex
    g_fh_rx: np.ndarray     # (L, M) complex
    block_index: int = 0

    def __post_init__(self):
        for name in ("g_data", "g_fh_tx", "g_fh_rx"):
            a = np.array(getattr(self, name), dtype=complex)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.g_data.ndim != 3 or self.g_fh_tx.ndim != 2 or self.g_fh_rx.ndim != 2:
            raise ValueError("channel arrays have wrong rank")
        L, _, M = self.g_data.shape
        if self.g_fh_tx.shape[0] != L or self.g_fh_rx.shape != (L, M):
            raise ValueError("inconsistent channel dimensions")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in ("g_data", "g_fh_tx", "g_fh_rx")):
            raise ValueError("non-finite channel entries")

    def __eq__(self, other):
        if not isinstance(other, ChannelBlock):
            return NotImplemented
        return (
            self.block_index == other.block_index
            and np.array_equal(self.g_data, other.g_data)
            and np.array_equal(self.g_fh_tx, other.g_fh_tx)
            and np.array_equal(self.g_fh_rx, other.g_fh_rx)
        )

    def check_dims(self, params: SimParams) -> None:
        L, K, M, N = params.num_uavs, params.num_users, params.uav_antennas, params.bs_antennas
        if self.g_data.shape != (L, K, M) or self.g_fh_tx.shape != (L, N) or self.g_fh_rx.shape != (L, M):
            raise ValueError(
                f"channel block dims {self.g_data.shape}/{self.g_fh_tx.shape}/{self.g_fh_rx.shape} "
                f"do not match L={L}, K={K}, M={M}, N={N}"
            )

    def fronthaul_gram(self) -> np.ndarray:
        """G_l G_l^H for every UAV, shape (L, N, N)."""
        rx2 = np.sum(np.abs(self.g_fh_rx) ** 2, axis=1)
        return rx2[:, None, None] * np.einsum("ln,lm->lnm", self.g_fh_tx, self.g_fh_tx.conj())


def rician(rng, kappa, shape):
    """Rician entries with unit mean power: LoS of random phase plus CN scatter."""
    los = np.sqrt(kappa / (kappa + 1.0)) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, shape))
    scatter = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5 / (kappa + 1.0))
    return los + scatter


def unit_phase(rng, shape):
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, shape))


def draw_block(s: Scenario, block_seed: int) -> ChannelBlock:
    p = s.params
    L, K, M, N = p.num_uavs, p.num_users, p.uav_antennas, p.bs_antennas
    rng = np.random.default_rng([int(s.seed), int(block_seed)])
    g_data = rician(rng, p.rice_factor, (L, K, M))
    g_tx = unit_phase(rng, (L, N))
    g_rx = unit_phase(rng, (L, M))
    return ChannelBlock(g_data=g_data, g_fh_tx=g_tx, g_fh_rx=g_rx, block_index=int(block_seed))


@dataclass(frozen=True)
class LinkGain:
    gain: np.ndarray        # h (M,) for data links, H_F (N, M) for fronthaul
    distance_m: float


def _distance(a, b) -> float:
    d = float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
    if d == 0.0:
        raise SingularityError("zero link distance")
    return d


def data_channel(block: ChannelBlock, l: int, k: int, uav_pos, user_pos, params: SimParams) -> LinkGain:
    d = _distance(uav_pos, user_pos)
    scale = np.sqrt(params.antenna_gain_data * d ** -params.pathloss_exponent_data)
    return LinkGain(gain=scale * block.g_data[l, k], distance_m=d)


def fronthaul_channel(block: ChannelBlock, l: int, uav_pos, bs_pos, params: SimParams) -> LinkGain:
    d = _distance(uav_pos, bs_pos)
    scale = np.sqrt(params.antenna_gain_fh * d ** -params.pathloss_exponent_fh)
    H = scale * np.outer(block.g_fh_tx[l], block.g_fh_rx[l].conj())
    return LinkGain(gain=H, distance_m=d)
