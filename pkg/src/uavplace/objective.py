"""Sum-rate objective and the marginal-contribution utilities built on it.

Evaluation in unchecked mode applies the QoS drop policy: an associated link
whose spectral efficiency is below the floor contributes nothing (the user is
treated as disconnected). Checked mode raises instead.
"""

from __future__ import annotations

import numpy as np

from . import channel
from .model import (
    Association,
    ConstraintViolation,
    InstanceError,
    Placement,
    Scenario,
    violations,
)


class RateTable:
    """Per-placement cache of received powers, rates, and exclusion rates.

    ``excluding(j)`` returns rates R_ik(-j): every pair's rate when UAV j's
    transmission is removed from the interference sum. Column j itself is
    meaningless there and is left as zero.
    """

    def __init__(self, placement: Placement, scenario: Scenario):
        if len(placement) != scenario.n_uavs:
            raise InstanceError("placement size does not match the UAV count")
        self.placement = placement
        self.scenario = scenario
        self.power = channel.rx_power_matrix(placement.array, scenario)
        gamma = channel.sinr_from_power(self.power, scenario.channel.noise_w)
        self.eta = np.log2(1.0 + gamma)
        self.rates = self.eta * scenario.bandwidths
        self._excl: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def excluding(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(eta, rate) matrices with UAV j removed from the network."""
        if j not in self._excl:
            power = self.power.copy()
            power[:, j] = 0.0
            gamma = channel.sinr_from_power(power, self.scenario.channel.noise_w)
            eta = np.log2(1.0 + gamma)
            eta[:, j] = 0.0
            self._excl[j] = (eta, eta * self.scenario.bandwidths)
        return self._excl[j]


def _table(placement, scenario, table):
    if table is None:
        return RateTable(placement, scenario)
    if table.placement != placement:
        raise ValueError("rate table was built for a different placement")
    return table


def _check(assoc: Association, placement: Placement, scenario: Scenario) -> None:
    found = violations(assoc, placement, scenario)
    if found:
        raise ConstraintViolation(found[0], f"violated constraints: {', '.join(found)}")


def _served_sum(q, eta, rates, floor, columns=None) -> float:
    mask = (q == 1) & (eta >= floor)
    if columns is not None:
        keep = np.zeros(q.shape[1], dtype=bool)
        keep[list(columns)] = True
        mask &= keep
    return float(rates[mask].sum())


def sum_rate(
    assoc: Association,
    placement: Placement,
    scenario: Scenario,
    *,
    checked: bool = True,
    table: RateTable | None = None,
) -> float:
    """Total downlink rate of associated users (bit/s)."""
    if checked:
        _check(assoc, placement, scenario)
    elif assoc.shape != (scenario.n_users, scenario.n_uavs):
        raise InstanceError("association shape does not match the scenario")
    t = _table(placement, scenario, table)
    return _served_sum(assoc.q, t.eta, t.rates, scenario.eta_min)


def neighbor_set(j: int, placement: Placement, range_m: float) -> list[int]:
    """UAVs within 3D distance ``range_m`` of UAV j, always including j."""
    pos = placement.array
    dist = np.linalg.norm(pos - pos[j], axis=1)
    nbrs = set(np.nonzero(dist <= range_m)[0].tolist())
    nbrs.add(j)
    return sorted(nbrs)


def marginal_utility(
    j: int,
    assoc: Association,
    placement: Placement,
    scenario: Scenario,
    *,
    checked: bool = True,
    table: RateTable | None = None,
) -> float:
    """Network sum-rate minus the sum-rate of the network without UAV j.

    Removing j drops both its served users and its interference on others.
    """
    if checked:
        _check(assoc, placement, scenario)
    t = _table(placement, scenario, table)
    others = [k for k in range(scenario.n_uavs) if k != j]
    total = _served_sum(assoc.q, t.eta, t.rates, scenario.eta_min)
    eta_x, rate_x = t.excluding(j)
    without = _served_sum(assoc.q, eta_x, rate_x, scenario.eta_min, others)
    return total - without


def marginal_utility_ranged(
    j: int,
    assoc: Association,
    placement: Placement,
    scenario: Scenario,
    range_m: float,
    *,
    table: RateTable | None = None,
) -> float:
    """Marginal utility restricted to UAVs within ``range_m`` of UAV j.

    The first sum uses live rates of the neighbourhood's users. The
    without-j rates see interference from the other neighbours only, since
    UAVs outside the range share nothing with j.
    """
    if range_m < 0:
        raise ValueError("range_m must be >= 0")
    t = _table(placement, scenario, table)
    nbrs = neighbor_set(j, placement, range_m)
    others = [k for k in nbrs if k != j]
    total = _served_sum(assoc.q, t.eta, t.rates, scenario.eta_min, nbrs)
    if not others:
        return total
    power = np.zeros_like(t.power)
    power[:, others] = t.power[:, others]
    eta_x = np.log2(1.0 + channel.sinr_from_power(power, scenario.channel.noise_w))
    rate_x = eta_x * scenario.bandwidths
    return total - _served_sum(assoc.q, eta_x, rate_x, scenario.eta_min, others)


def _is_unilateral(j, a, a_prime) -> bool:
    (p, q), (p2, q2) = a, a_prime
    if len(p) != len(p2) or q.shape != q2.shape:
        return False
    for k in range(len(p)):
        if k != j and p.positions[k] != p2.positions[k]:
            return False
    cols = np.ones(q.shape[1], dtype=bool)
    cols[j] = False
    return np.array_equal(q.q[:, cols], q2.q[:, cols])


def potential_identity(j: int, a, a_prime, scenario: Scenario) -> float:
    """Residual |dF - dU_j| between state ``a`` and j's unilateral deviation.

    States are ``(Placement, Association)`` pairs evaluated under the QoS
    drop policy.
    """
    if not _is_unilateral(j, a, a_prime):
        raise ValueError(f"states differ in more than UAV {j}'s action")
    (p, q), (p2, q2) = a, a_prime
    t, t2 = RateTable(p, scenario), RateTable(p2, scenario)
    df = sum_rate(q, p, scenario, checked=False, table=t) - sum_rate(
        q2, p2, scenario, checked=False, table=t2
    )
    du = marginal_utility(j, q, p, scenario, checked=False, table=t) - marginal_utility(
        j, q2, p2, scenario, checked=False, table=t2
    )
    return abs(df - du)


def drop_unserved(assoc: Association, placement: Placement, scenario: Scenario,
                  table: RateTable | None = None) -> Association:
    """Association with every QoS-violating link removed."""
    t = _table(placement, scenario, table)
    q = assoc.q.copy()
    q[t.eta < scenario.eta_min] = 0
    return Association(q)
