import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavplace import channel
from uavplace.channel import GeometryError, LinkGeometry
from uavplace.model import ChannelParams, Placement

from conftest import make_scenario

GOLDEN = json.loads((Path(__file__).parent / "data" / "path_loss_golden.json").read_text())
P = ChannelParams()


def _geom_at_elevation(theta_deg, r=100.0):
    return LinkGeometry(r, r * math.cos(math.radians(theta_deg)))


def test_los_at_elevation_epsilon_is_one_over_one_plus_epsilon():
    assert channel.p_los(_geom_at_elevation(9.61), P) == pytest.approx(1 / 10.61, rel=1e-12)


def test_los_directly_overhead():
    # mpmath at 40 digits: 0.99997507453790302...
    assert channel.p_los(LinkGeometry(150.0, 0.0), P) == pytest.approx(0.999975074537903, rel=1e-12)


def test_as_printed_form_near_horizon():
    # mpmath: 1/(1 + 9.61 * exp(-9.61)) = 0.99935601811835341...
    printed = ChannelParams(los_formula="as_printed")
    g = LinkGeometry(1000.0, 1000.0)  # grazing: theta = 0
    assert channel.p_los(g, printed) == pytest.approx(0.999356018118353, rel=1e-12)


@pytest.mark.parametrize("case", GOLDEN["cases"], ids=lambda c: f"r{c['r']}-d{c['d']}")
def test_path_loss_matches_golden(case):
    g = LinkGeometry(case["r"], case["d"])
    assert channel.p_los(g, P) == pytest.approx(case["p_los"], rel=1e-12)
    assert channel.path_loss(g, P) == pytest.approx(case["gain"], rel=1e-12)


def test_zero_excess_loss_is_free_space():
    flat = ChannelParams(zeta_los_db=0.0, zeta_nlos_db=0.0)
    for d in (0.0, 50.0, 99.0):
        g = LinkGeometry(100.0, d)
        assert channel.path_loss(g, flat) == pytest.approx(
            (4 * math.pi * 2e9 * 100 / 3e8) ** -2, rel=1e-12)


def test_doubling_distance_quarters_gain_at_fixed_angle():
    g1, g2 = LinkGeometry(100.0, 60.0), LinkGeometry(200.0, 120.0)
    assert channel.path_loss(g2, P) == pytest.approx(channel.path_loss(g1, P) / 4, rel=1e-12)


def test_geometry_errors():
    with pytest.raises(GeometryError):
        LinkGeometry(10.0, 20.0)
    with pytest.raises(GeometryError):
        LinkGeometry(0.0, 0.0)


def test_single_uav_sinr_is_snr():
    s = make_scenario([(10, 20)], n_uavs=1, quota=1)
    p = Placement(((50, 50, 100),))
    gain = channel.path_loss(LinkGeometry.between((50, 50, 100), (10, 20)), P)
    assert channel.sinr(0, 0, p, s) == gain * s.uavs[0].power_w / P.noise_w


def test_equal_gain_interferer_without_noise_gives_unit_sinr():
    quiet = ChannelParams(noise_dbm=-400.0)
    s = make_scenario([(100, 100)], n_uavs=2, channel=quiet)
    p = Placement(((50, 50, 100), (150, 150, 100)))
    assert channel.sinr(0, 0, p, s) == pytest.approx(1.0, rel=1e-12)


def _brute_sinr(user_xy, uavs, powers_dbm, params):
    """Independent per-link link budget written from the closed forms."""
    def gain(u):
        d = math.dist(u[:2], user_xy)
        r = math.sqrt(d * d + u[2] ** 2)
        theta = math.degrees(math.asin(u[2] / r))
        p = 1 / (1 + params.epsilon * math.exp(-params.beta * (theta - params.epsilon)))
        fspl = (4 * math.pi * params.carrier_hz * r / params.light_speed) ** -params.alpha
        return fspl / (10 ** (params.zeta_los_db / 10) * p + 10 ** (params.zeta_nlos_db / 10) * (1 - p))
    rx = [10 ** ((pw - 30) / 10) * gain(u) for u, pw in zip(uavs, powers_dbm)]
    noise = 10 ** ((params.noise_dbm - 30) / 10)
    return [rx[j] / (noise + sum(rx) - rx[j]) for j in range(len(rx))]


def test_three_uav_instance_matches_brute_force(rng):
    users = rng.uniform(0, 200, (6, 2))
    powers = [10.0, 7.0, 13.0]
    s = make_scenario(users, n_uavs=3, power_dbm=powers)
    uavs = [(50, 50, 100), (150, 50, 200), (150, 150, 100)]
    gamma = channel.sinr_matrix(np.array(uavs, float), s)
    for i, xy in enumerate(users):
        expected = _brute_sinr(tuple(xy), uavs, powers, P)
        np.testing.assert_allclose(gamma[i], expected, rtol=1e-12)
        for j in range(3):
            assert channel.sinr(i, j, Placement(tuple(uavs)), s) == pytest.approx(expected[j], rel=1e-12)


def test_spectral_efficiency_and_rate_examples():
    assert channel.spectral_efficiency(1.0) == 1.0
    assert channel.spectral_efficiency(0.0) == 0.0
    # mpmath: log2(1 + 10**-0.3) = 0.58610392644534756...
    assert channel.spectral_efficiency(10 ** -0.3) == pytest.approx(0.5861039264453476, rel=1e-14)
    with pytest.raises(ValueError):
        channel.spectral_efficiency(-0.1)


def test_unit_sinr_gives_one_megabit():
    quiet = ChannelParams(noise_dbm=-400.0)
    s = make_scenario([(100, 100)], n_uavs=2, channel=quiet)
    p = Placement(((50, 50, 100), (150, 150, 100)))
    assert channel.rate(0, 0, p, s) == pytest.approx(1e6, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(4)))
def test_sinr_is_invariant_under_uav_relabeling(perm):
    s = make_scenario([(20, 30), (180, 40), (90, 160)], n_uavs=4)
    pos = np.array([(50, 50, 100), (150, 50, 100), (50, 150, 200), (150, 150, 200)], float)
    base = channel.sinr_matrix(pos, s)
    permuted = channel.sinr_matrix(pos[list(perm)], s)
    np.testing.assert_allclose(permuted, base[:, list(perm)], rtol=1e-12)


def test_batched_gain_matches_single():
    users = np.array([(0.0, 0.0), (120.0, 80.0)])
    batch = np.array([[(50, 50, 100), (150, 150, 200)], [(150, 50, 100), (50, 150, 200)]], float)
    full = channel.gain_matrix(batch, users, P)
    assert full.shape == (2, 2, 2)
    for k in range(2):
        np.testing.assert_array_equal(full[k], channel.gain_matrix(batch[k], users, P))
