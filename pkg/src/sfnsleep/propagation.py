"""Multi-cell geometry, link gains and the per-user SFN channel factor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

RBP_BANDWIDTH_HZ = 180e3


@dataclass(frozen=True)
class BaseStation:
    position: tuple[float, float]
    in_sfn: bool = False
    interferer_tx_power_watts: float = 40.0


@dataclass(frozen=True)
class UserTerminal:
    position: tuple[float, float]
    id: int = 1
    # distance from the reference cell centre along the user axis
    distance_m: float | None = None


@dataclass(frozen=True)
class PropagationParams:
    tx_antenna_gain_db: float = 14.0
    rx_antenna_gain_db: float = 0.0
    penetration_loss_db: float = 20.0
    noise_density_dbm_per_hz: float = -168.0
    pathloss_intercept_db: float = 128.1
    pathloss_slope_db_per_decade: float = 37.6
    min_coupling_distance_m: float = 35.0
    # subtract the interference-over-thermal of each user from its SFN link gains
    eq3_interference_term: bool = False

    def __post_init__(self):
        if self.pathloss_slope_db_per_decade < 0 or self.penetration_loss_db < 0:
            raise ValueError("path-loss slope and penetration loss must be non-negative")
        if self.min_coupling_distance_m < 0:
            raise ValueError("min_coupling_distance_m must be non-negative")
        if not math.isfinite(self.noise_density_dbm_per_hz):
            raise ValueError("noise density must be finite")


@dataclass(frozen=True)
class NetworkScenario:
    stations: tuple[BaseStation, ...]
    users: tuple[UserTerminal, ...]
    params: PropagationParams = PropagationParams()
    tb_bandwidth_hz: float = 9 * RBP_BANDWIDTH_HZ
    # when set, interferers spread their power over this band and only the
    # share falling inside the TB bandwidth interferes
    system_bandwidth_hz: float | None = None
    # users scored by the metrics but ignored by the optimizer
    eval_users: tuple[UserTerminal, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "eval_users", tuple(self.eval_users))
        if not any(s.in_sfn for s in self.stations):
            raise ValueError("scenario needs at least one SFN station")
        if self.tb_bandwidth_hz <= 0:
            raise ValueError("TB bandwidth must be positive")
        if not self.users:
            raise ValueError("scenario needs at least one user")
        if self.system_bandwidth_hz is not None and self.system_bandwidth_hz < self.tb_bandwidth_hz:
            raise ValueError("system bandwidth must be at least the TB bandwidth")

    def with_bandwidth(self, tb_bandwidth_hz: float) -> "NetworkScenario":
        return replace(self, tb_bandwidth_hz=tb_bandwidth_hz)

    @property
    def noise_watts(self) -> float:
        return noise_power_watts(self.params.noise_density_dbm_per_hz, self.tb_bandwidth_hz)

    def channel_factors(self, users=None) -> np.ndarray:
        """H_u for each user (defaults to the optimized population)."""
        users = self.users if users is None else users
        return np.array([aggregate_channel_factor(u, self) for u in users])


def noise_power_watts(density_dbm_per_hz: float, bandwidth_hz: float) -> float:
    return 10 ** ((density_dbm_per_hz - 30) / 10) * bandwidth_hz


# axial-coordinate walk directions around a hexagonal ring
_HEX_DIRS = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]


def build_hex_layout(isd_metres: float, rings: int) -> list[tuple[float, float]]:
    """Sites of a hexagonal lattice: the origin, then ring 1, ring 2, ..."""
    if isd_metres <= 0:
        raise ValueError("inter-site distance must be positive")
    if rings < 0:
        raise ValueError("rings must be >= 0")
    axial = [(0, 0)]
    for r in range(1, rings + 1):
        a, b = -r, r  # start at direction (-1, 1) scaled by r
        for da, db in _HEX_DIRS:
            for _ in range(r):
                axial.append((a, b))
                a, b = a + da, b + db
    out = []
    for a, b in axial:
        x = isd_metres * (a + b / 2)
        y = isd_metres * (b * math.sqrt(3) / 2)
        out.append((round(x, 9) + 0.0, round(y, 9) + 0.0))
    return out


def place_users_on_axis(count: int, spacing_m: float, start_m: float,
                        axis_direction: float = 0.0, first_id: int = 1) -> list[UserTerminal]:
    """Users evenly spaced along a ray from the origin.

    ``axis_direction`` is the ray angle in degrees (0 points along +x).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if spacing_m <= 0:
        raise ValueError("spacing must be positive")
    if start_m < 0:
        raise ValueError("start must be non-negative")
    return users_at_distances([start_m + i * spacing_m for i in range(count)],
                              axis_direction, first_id)


def users_at_distances(distances, axis_direction: float = 0.0, first_id: int = 1):
    theta = math.radians(axis_direction)
    ux, uy = math.cos(theta), math.sin(theta)
    return [
        UserTerminal(position=(d * ux, d * uy), id=first_id + i, distance_m=float(d))
        for i, d in enumerate(distances)
    ]


def path_loss_db(distance_m: float, params: PropagationParams = PropagationParams()) -> float:
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    d = max(distance_m, params.min_coupling_distance_m)
    return params.pathloss_intercept_db + params.pathloss_slope_db_per_decade * math.log10(d / 1000)


def channel_gain_db(user: UserTerminal, station: BaseStation,
                    params: PropagationParams = PropagationParams()) -> float:
    d = math.dist(user.position, station.position)
    return (params.tx_antenna_gain_db + params.rx_antenna_gain_db
            - path_loss_db(d, params) - params.penetration_loss_db)


def channel_gain_linear(user: UserTerminal, station: BaseStation,
                        params: PropagationParams = PropagationParams()) -> float:
    return 10 ** (channel_gain_db(user, station, params) / 10)


def aggregate_channel_factor(user: UserTerminal, scenario: NetworkScenario) -> float:
    """SINR per watt of SFN transmit power seen by ``user``.

    SFN links add up in the numerator; every other site contributes its gain
    times its transmit power to the denominator, next to thermal noise over
    the TB bandwidth.
    """
    params = scenario.params
    share = 1.0
    if scenario.system_bandwidth_hz is not None:
        share = scenario.tb_bandwidth_hz / scenario.system_bandwidth_hz
    signal = 0.0
    interference = 0.0
    for st in scenario.stations:
        if st.in_sfn:
            signal += channel_gain_linear(user, st, params)
        else:
            interference += channel_gain_linear(user, st, params) * st.interferer_tx_power_watts * share
    noise = scenario.noise_watts
    if params.eq3_interference_term:
        # in dB, so a multiplicative penalty on every SFN link
        signal /= 1 + interference / noise
    return signal / (interference + noise)


def nearest_sites_to_axis(sites, count: int, axis_direction: float = 0.0) -> list[int]:
    """Indices of the origin site plus the ``count - 1`` neighbours closest to the user ray."""
    theta = math.radians(axis_direction)
    ux, uy = math.cos(theta), math.sin(theta)

    def ray_distance(p):
        along = max(p[0] * ux + p[1] * uy, 0.0)
        return math.hypot(p[0] - along * ux, p[1] - along * uy)

    origin = min(range(len(sites)), key=lambda i: math.hypot(*sites[i]))
    radii = [math.hypot(*p) for p in sites]
    nearest = min(r for i, r in enumerate(radii) if i != origin) if len(sites) > 1 else 0.0
    # lattice neighbours of the origin first, then everything else
    rest = sorted((i for i in range(len(sites)) if i != origin),
                  key=lambda i: (radii[i] > nearest * (1 + 1e-6),
                                 round(ray_distance(sites[i]), 6), radii[i], i))
    return [origin] + rest[: count - 1]


def build_scenario(isd_m=500.0, rings=2, sfn_site_indices=None, sfn_count=4,
                   interferer_power_w=40.0, axis_direction=0.0, user_count=80,
                   spacing_m=2.0, start_m=90.0, extra_eval_distances=(),
                   params=PropagationParams(), tb_bandwidth_hz=9 * RBP_BANDWIDTH_HZ,
                   system_bandwidth_hz=None) -> NetworkScenario:
    """The hexagonal SFN deployment with users on the axis of the reference cell."""
    sites = build_hex_layout(isd_m, rings)
    if sfn_site_indices is None:
        sfn_site_indices = nearest_sites_to_axis(sites, sfn_count, axis_direction)
    bad = [i for i in sfn_site_indices if not 0 <= i < len(sites)]
    if bad:
        raise ValueError(f"SFN site indices out of range: {bad}")
    sfn = set(sfn_site_indices)
    stations = [BaseStation(p, i in sfn, interferer_power_w) for i, p in enumerate(sites)]
    users = place_users_on_axis(user_count, spacing_m, start_m, axis_direction)
    extra = users_at_distances(extra_eval_distances, axis_direction, first_id=user_count + 1)
    return NetworkScenario(stations, users, params, tb_bandwidth_hz,
                           system_bandwidth_hz, eval_users=extra)
