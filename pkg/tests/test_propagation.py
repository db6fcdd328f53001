import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfnsleep.propagation import (
    BaseStation,
    NetworkScenario,
    PropagationParams,
    UserTerminal,
    aggregate_channel_factor,
    build_hex_layout,
    build_scenario,
    channel_gain_db,
    channel_gain_linear,
    noise_power_watts,
    path_loss_db,
    place_users_on_axis,
)


def test_hex_layout_counts_and_ring_geometry():
    assert len(build_hex_layout(500, 2)) == 19
    assert build_hex_layout(500, 0) == [(0.0, 0.0)]
    ring1 = build_hex_layout(500, 1)
    assert len(ring1) == 7
    assert all(math.hypot(*p) == pytest.approx(500) for p in ring1[1:])


@pytest.mark.parametrize("rings", [1, 2, 3])
def test_hex_layout_is_a_lattice(rings):
    pts = np.array(build_hex_layout(500, rings))
    assert len(pts) == 1 + 3 * rings * (rings + 1)
    d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    off = d[~np.eye(len(pts), dtype=bool)]
    assert off.min() == pytest.approx(500)


def test_hex_layout_rejects_bad_input():
    with pytest.raises(ValueError):
        build_hex_layout(0, 1)
    with pytest.raises(ValueError):
        build_hex_layout(500, -1)


def test_users_on_axis():
    users = place_users_on_axis(80, 2, 90)
    assert len(users) == 80
    assert users[-1].distance_m == 248 and users[-1].position == pytest.approx((248, 0))
    single = place_users_on_axis(1, 2, 90)
    assert len(single) == 1 and single[0].distance_m == 90
    tilted = place_users_on_axis(2, 10, 0, axis_direction=90)
    assert tilted[1].position == pytest.approx((0, 10), abs=1e-12)


def test_path_loss_examples():
    assert path_loss_db(500) == pytest.approx(116.78, abs=5e-3)
    assert path_loss_db(1000) == pytest.approx(128.1)
    assert path_loss_db(10) == path_loss_db(35)
    with pytest.raises(ValueError):
        path_loss_db(0)


def test_channel_gain_examples():
    u = UserTerminal((500.0, 0.0))
    bs = BaseStation((0.0, 0.0), True)
    assert channel_gain_db(u, bs) == pytest.approx(-122.78, abs=5e-3)
    assert channel_gain_linear(u, bs) == pytest.approx(5.27e-13, rel=2e-3)
    far = UserTerminal((1000.0, 0.0))
    assert channel_gain_db(u, bs) - channel_gain_db(far, bs) == pytest.approx(37.6 * math.log10(2))
    flat = PropagationParams(0, 0, 0, -168, 0, 0, 35)
    assert channel_gain_linear(u, bs, flat) == pytest.approx(1.0)


def test_noise_power():
    n = noise_power_watts(-168, 1.62e6)
    assert 10 * math.log10(n * 1e3) == pytest.approx(-105.9, abs=0.05)
    assert n == pytest.approx(2.57e-14, rel=5e-3)


def _scenario(stations, users=(UserTerminal((100.0, 0.0)),), **kw):
    return NetworkScenario(tuple(stations), tuple(users), PropagationParams(), 1.62e6, **kw)


def test_single_station_factor_is_gain_over_noise():
    sc = _scenario([BaseStation((0.0, 0.0), True)])
    u = sc.users[0]
    assert aggregate_channel_factor(u, sc) == pytest.approx(
        channel_gain_linear(u, sc.stations[0]) / sc.noise_watts)


def test_two_equidistant_sfn_stations_double_the_factor():
    u = UserTerminal((0.0, 0.0))
    one = _scenario([BaseStation((300.0, 0.0), True)], [u])
    two = _scenario([BaseStation((300.0, 0.0), True), BaseStation((-300.0, 0.0), True)], [u])
    assert aggregate_channel_factor(u, two) == pytest.approx(2 * aggregate_channel_factor(u, one))


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1.0, 100.0), bump=st.floats(0.1, 50.0), seed=st.integers(0, 10_000))
def test_factor_decreases_with_interferer_power_and_ignores_order(p, bump, seed):
    sites = build_hex_layout(500, 1)
    u = UserTerminal((120.0, 40.0))
    st0 = [BaseStation(s, i < 3, p) for i, s in enumerate(sites)]
    h0 = aggregate_channel_factor(u, _scenario(st0, [u]))
    st1 = list(st0)
    st1[5] = BaseStation(sites[5], False, p + bump)
    assert aggregate_channel_factor(u, _scenario(st1, [u])) < h0
    perm = np.random.default_rng(seed).permutation(len(st0))
    assert aggregate_channel_factor(u, _scenario([st0[i] for i in perm], [u])) == pytest.approx(h0, rel=1e-12)


def test_in_band_interference_share():
    sites = build_hex_layout(500, 1)
    stations = [BaseStation(s, i == 0) for i, s in enumerate(sites)]
    u = UserTerminal((100.0, 0.0))
    full = aggregate_channel_factor(u, _scenario(stations, [u]))
    shared = aggregate_channel_factor(u, _scenario(stations, [u], system_bandwidth_hz=20e6))
    assert shared > full


def test_interference_penalty_flag_only_lowers_factors():
    base = build_scenario(user_count=10)
    pen = build_scenario(user_count=10, params=PropagationParams(eq3_interference_term=True))
    assert np.all(pen.channel_factors() < base.channel_factors())


def test_default_scenario_geometry():
    sc = build_scenario()
    assert len(sc.stations) == 19 and sum(s.in_sfn for s in sc.stations) == 4
    assert sc.stations[0].in_sfn and sc.stations[0].position == (0.0, 0.0)
    assert len(sc.users) == 80
    sfn = [s.position for s in sc.stations if s.in_sfn]
    # the user axis heads toward an SFN neighbour
    assert any(p == pytest.approx((500.0, 0.0)) for p in sfn)
    nearest = [min(math.dist(u.position, p) for p in sfn) for u in sc.users]
    assert all(b >= a - 1e-9 for a, b in zip(nearest, nearest[1:]))
    h = sc.channel_factors()
    assert np.all(h > 0) and np.all(np.diff(h) < 0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        _scenario([BaseStation((0.0, 0.0), False)])
    with pytest.raises(ValueError):
        build_scenario(sfn_site_indices=[0, 99])
