"""Air-to-ground link budget: LoS probability, averaged path loss, SINR,
spectral efficiency and per-user rate.

Scalar functions take a :class:`LinkGeometry`; the ``*_matrix`` helpers are
the vectorised forms the optimisers use. All arithmetic is in linear watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelParams, Placement, Scenario


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LinkGeometry:
    r: float  # 3D UAV-to-user distance (m)
    d: float  # ground-projected distance (m)

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError(f"3D distance must be > 0, got {self.r}")
        if self.d < 0:
            raise GeometryError(f"2D distance must be >= 0, got {self.d}")
        if self.r < self.d:
            raise GeometryError(f"r={self.r} < d={self.d}")

    @classmethod
    def between(cls, uav_xyz, user_xy) -> "LinkGeometry":
        d = math.hypot(uav_xyz[0] - user_xy[0], uav_xyz[1] - user_xy[1])
        return cls(math.hypot(d, uav_xyz[2]), d)


def elevation_deg(r, d):
    """Elevation angle in degrees; 90 when the user is directly below."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    h = np.sqrt(np.maximum(r * r - d * d, 0.0))
    return np.degrees(np.arctan2(h, d))


def p_los_array(r, d, params: ChannelParams):
    theta = elevation_deg(r, d)
    if params.los_formula == "standard":
        expo = -params.beta * (theta - params.epsilon)
    else:
        expo = -params.beta * theta - params.epsilon
    return 1.0 / (1.0 + params.epsilon * np.exp(expo))


def path_loss_array(r, d, params: ChannelParams):
    """Linear channel gain (path loss as a factor < 1) for arrays of links."""
    r = np.asarray(r, dtype=float)
    p = p_los_array(r, d, params)
    fspl = (4.0 * math.pi * params.carrier_hz * r / params.light_speed) ** (-params.alpha)
    excess = params.zeta_los * p + params.zeta_nlos * (1.0 - p)
    return fspl / excess


def p_los(geom: LinkGeometry, params: ChannelParams) -> float:
    return float(p_los_array(geom.r, geom.d, params))


def path_loss(geom: LinkGeometry, params: ChannelParams) -> float:
    if not geom.r > 0:
        raise GeometryError("path loss is singular at r = 0")
    return float(path_loss_array(geom.r, geom.d, params))


def gain_matrix(uav_xyz, users_xy, params: ChannelParams) -> np.ndarray:
    """Channel gains with shape ``(..., I, J)`` for UAV positions ``(..., J, 3)``."""
    uav_xyz = np.asarray(uav_xyz, dtype=float)
    users_xy = np.asarray(users_xy, dtype=float)
    dx = users_xy[:, 0, None] - uav_xyz[..., None, :, 0]
    dy = users_xy[:, 1, None] - uav_xyz[..., None, :, 1]
    d2 = dx * dx + dy * dy
    h = uav_xyz[..., None, :, 2]
    d = np.sqrt(d2)
    r = np.sqrt(d2 + h * h)
    return path_loss_array(r, d, params)


def rx_power_matrix(uav_xyz, scenario: Scenario) -> np.ndarray:
    """Received power P_j * L_ij in watts, shape ``(..., I, J)``."""
    return gain_matrix(uav_xyz, scenario.users_xy, scenario.channel) * scenario.powers_w


def sinr_from_power(power: np.ndarray, noise_w: float) -> np.ndarray:
    """SINR of every (user, UAV) pair given received powers ``(..., I, J)``.

    All other UAVs interfere regardless of association. The interference sum
    is formed explicitly over k != j so a single UAV yields exactly P*L/noise.
    """
    power = np.asarray(power, dtype=float)
    n_uav = power.shape[-1]
    interference = np.zeros_like(power)
    for j in range(n_uav):
        for k in range(n_uav):
            if k != j:
                interference[..., j] += power[..., k]
    return power / (noise_w + interference)


def sinr_matrix(uav_xyz, scenario: Scenario) -> np.ndarray:
    return sinr_from_power(rx_power_matrix(uav_xyz, scenario), scenario.channel.noise_w)


def spectral_efficiency(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if (gamma < 0).any():
        raise ValueError("SINR must be >= 0")
    out = np.log2(1.0 + gamma)
    return float(out) if out.ndim == 0 else out


def spectral_efficiency_matrix(uav_xyz, scenario: Scenario) -> np.ndarray:
    return np.log2(1.0 + sinr_matrix(uav_xyz, scenario))


def rate_matrix(uav_xyz, scenario: Scenario) -> np.ndarray:
    """Rate b_j * eta_ij (bit/s) of every pair, shape ``(..., I, J)``."""
    return spectral_efficiency_matrix(uav_xyz, scenario) * scenario.bandwidths


def _check_indices(user: int, uav: int, scenario: Scenario) -> None:
    if not 0 <= user < scenario.n_users:
        raise IndexError(f"user index {user} out of range")
    if not 0 <= uav < scenario.n_uavs:
        raise IndexError(f"uav index {uav} out of range")


def sinr(user: int, uav: int, placement: Placement, scenario: Scenario) -> float:
    _check_indices(user, uav, scenario)
    xy = scenario.users_xy[user]
    params = scenario.channel

    def received(k: int) -> float:
        geom = LinkGeometry.between(placement.positions[k], xy)
        return scenario.uavs[k].power_w * path_loss(geom, params)

    interference = sum(received(k) for k in range(scenario.n_uavs) if k != uav)
    return received(uav) / (params.noise_w + interference)


def rate(user: int, uav: int, placement: Placement, scenario: Scenario) -> float:
    gamma = sinr(user, uav, placement, scenario)
    return scenario.uavs[uav].bandwidth_hz * spectral_efficiency(gamma)
