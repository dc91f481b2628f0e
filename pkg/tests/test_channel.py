import numpy as np
import pytest

from uavcoop.channel import ChannelBlock, data_channel, draw_block, fronthaul_channel, rician
from uavcoop.errors import SingularityError


def test_rician_unit_mean_power():
    rng = np.random.default_rng(1)
    g = rician(rng, 10 ** -0.3, 1_000_000)
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.01)


def test_rician_pure_los_limit():
    g = rician(np.random.default_rng(0), 1e12, 100)
    np.testing.assert_allclose(np.abs(g), 1.0, atol=1e-5)


def test_data_channel_distance_and_scale(desk_params):
    block = ChannelBlock(g_data=np.ones((3, 2, 2)), g_fh_tx=np.ones((3, 6)), g_fh_rx=np.ones((3, 2)))
    link = data_channel(block, 0, 0, (0, 0, 100), (300, 400, 0), desk_params)
    assert link.distance_m == pytest.approx(509.90195, abs=1e-5)
    expected = np.sqrt(1e-3 * 509.90195 ** -2.5)
    np.testing.assert_allclose(np.abs(link.gain), expected, rtol=1e-6)


def test_fronthaul_channel_rank_one(desk):
    s, block, _ = desk
    link = fronthaul_channel(block, 1, s.geometry.uav_start_positions[1], s.geometry.bs_position, s.params)
    sv = np.linalg.svd(link.gain, compute_uv=False)
    assert link.gain.shape == (s.params.bs_antennas, s.params.uav_antennas)
    assert sv[1] <= 1e-12 * sv[0]


def test_zero_distance_is_singular(desk):
    s, block, _ = desk
    desk_params = s.params
    with pytest.raises(SingularityError):
        data_channel(block, 0, 0, (1.0, 2.0, 3.0), (1.0, 2.0, 3.0), desk_params)


def test_blocks_are_seeded_and_independent(desk):
    s, block, _ = desk
    assert draw_block(s, 0) == block
    other = draw_block(s, 1)
    assert other != block
    assert other.block_index == 1


def test_check_dims(desk):
    s, block, _ = desk
    block.check_dims(s.params)
    with pytest.raises(ValueError):
        block.check_dims(s.params.replace(bs_antennas=7))


def test_gram_matches_outer_product(desk):
    s, block, _ = desk
    G = block.fronthaul_gram()
    H = np.outer(block.g_fh_tx[0], block.g_fh_rx[0].conj())
    np.testing.assert_allclose(G[0], H @ H.conj().T, atol=1e-12)


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        ChannelBlock(g_data=np.full((1, 1, 1), np.nan), g_fh_tx=np.ones((1, 2)), g_fh_rx=np.ones((1, 1)))
