"""Binary log-linear learning over joint UAV position and user association.

One UAV at a time proposes an axis-neighbour grid move together with a fresh
set of users to serve, evaluates its marginal-contribution utility for the
current and proposed action, and switches with the two-point Gibbs
probability at the current temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import channel
from .model import Association, InstanceError, Placement, Scenario

COOLING = ("logarithmic", "constant")
ASSOC_PROPOSALS = ("uniform", "local")
ACTIVATION = ("uniform_single", "coin_flip")


@dataclass(frozen=True)
class BlllConfig:
    t0: float | None = None  # None: estimate from warm-up states
    cooling: str = "logarithmic"
    max_iters: int = 10_000
    activation: str = "uniform_single"
    neighborhood_range_m: float | None = None
    seed: int = 0
    warmup_states: int = 100
    lazy_moves: bool = True  # current location is also a candidate
    assoc_proposal: str = "uniform"

    def __post_init__(self):
        if self.t0 is not None and not self.t0 > 0:
            raise InstanceError("t0 must be > 0")
        if self.max_iters < 1:
            raise InstanceError("max_iters must be >= 1")
        if self.cooling not in COOLING:
            raise InstanceError(f"cooling must be one of {COOLING}")
        if self.activation not in ACTIVATION:
            raise InstanceError(f"activation must be one of {ACTIVATION}")
        if self.assoc_proposal not in ASSOC_PROPOSALS:
            raise InstanceError(f"assoc_proposal must be one of {ASSOC_PROPOSALS}")
        if self.neighborhood_range_m is not None and self.neighborhood_range_m < 0:
            raise InstanceError("neighborhood_range_m must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InstanceError("seed must be a 64-bit unsigned integer")


class TraceRecord(NamedTuple):
    iter: int
    temperature: float
    mover: int
    accepted: int
    sum_rate_bps: float
    best_sum_rate_bps: float


class Candidate(NamedTuple):
    grid_index: int
    served: np.ndarray  # users the mover would serve


class _Links:
    """Grid-point gain columns, computed on demand and memoised per run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.points = scenario.grid.points()
        self._cache: dict[int, np.ndarray] = {}

    def power(self, j: int, index: int) -> np.ndarray:
        col = self._cache.get(index)
        if col is None:
            col = channel.gain_matrix(
                self.points[index][None, :], self.scenario.users_xy, self.scenario.channel
            )[:, 0]
            self._cache[index] = col
        return col * self.scenario.powers_w[j]


@dataclass
class BlllState:
    """Mutable learner state; arrays are owned by one run."""

    scenario: Scenario
    grid_indices: np.ndarray  # (J,)
    serving: np.ndarray  # (I,), -1 = unassociated
    power: np.ndarray  # (I, J) received power in watts
    sum_rate: float = 0.0
    iteration: int = 0
    best_grid_indices: np.ndarray = field(default=None)
    best_serving: np.ndarray = field(default=None)
    best_sum_rate: float = 0.0
    t0: float | None = None

    @property
    def placement(self) -> Placement:
        return Placement.from_indices(self.scenario.grid, self.grid_indices)

    @property
    def association(self) -> Association:
        return Association.from_serving(self.serving, self.scenario.n_uavs)

    @property
    def best_placement(self) -> Placement:
        return Placement.from_indices(self.scenario.grid, self.best_grid_indices)

    @property
    def best_association(self) -> Association:
        return Association.from_serving(self.best_serving, self.scenario.n_uavs)

    def utilities(self, range_m: float | None = None) -> np.ndarray:
        pos = self.scenario.grid.points()[self.grid_indices]
        return np.array([
            utility(self.scenario, self.power, self.serving, j, pos, range_m)
            for j in range(self.scenario.n_uavs)
        ])


def _served_eta(power, serving, noise, removed=None, columns=None):
    """Users (with their serving UAV and eta) whose links count.

    ``removed`` drops one UAV from the network entirely; ``columns`` limits
    which serving UAVs are summed.
    """
    rows = np.nonzero(serving >= 0)[0]
    cols = serving[rows]
    if removed is not None:
        keep = cols != removed
        rows, cols = rows[keep], cols[keep]
    if columns is not None:
        keep = np.isin(cols, columns)
        rows, cols = rows[keep], cols[keep]
    p = power[rows]
    sig = p[np.arange(len(rows)), cols]
    interference = p.sum(axis=1) - sig
    if removed is not None:
        interference = interference - p[:, removed]
    eta = np.log2(1.0 + sig / (noise + interference))
    return rows, cols, eta


def _sum_served(scenario: Scenario, power, serving, removed=None, columns=None) -> float:
    _, cols, eta = _served_eta(power, serving, scenario.channel.noise_w, removed, columns)
    ok = eta >= scenario.eta_min
    return float((scenario.bandwidths[cols[ok]] * eta[ok]).sum())


def network_sum_rate(scenario: Scenario, power, serving) -> float:
    return _sum_served(scenario, power, serving)


def utility(scenario: Scenario, power, serving, j: int, positions=None,
            range_m: float | None = None) -> float:
    """Marginal-contribution utility of UAV j on raw arrays (QoS drop policy)."""
    if range_m is None:
        return _sum_served(scenario, power, serving) - _sum_served(
            scenario, power, serving, removed=j
        )
    dist = np.linalg.norm(positions - positions[j], axis=1)
    nbrs = np.nonzero(dist <= range_m)[0]
    if j not in nbrs:
        nbrs = np.append(nbrs, j)
    others = nbrs[nbrs != j]
    total = _sum_served(scenario, power, serving, columns=nbrs)
    if len(others) == 0:
        return total
    # without j, neighbours only know about each other's interference
    local = np.zeros_like(power)
    local[:, others] = power[:, others]
    return total - _sum_served(scenario, local, serving, removed=j, columns=others)


def temperature(t0: float, t: int, cooling: str = "logarithmic") -> float:
    """Temperature at iteration ``t >= 1``."""
    if cooling == "constant":
        return t0
    return t0 / math.log(1.0 + t)


def acceptance_probability(u_current: float, u_candidate: float, temp: float) -> float:
    """e^{u_c/T} / (e^{u/T} + e^{u_c/T}) evaluated without overflow."""
    if not temp > 0:
        raise ValueError("temperature must be > 0")
    a, b = u_current / temp, u_candidate / temp
    if math.isinf(a) or math.isinf(b):
        z = (u_candidate - u_current) / temp
        return 1.0 if z > 0 else (0.0 if z < 0 else 0.5)
    m = max(a, b)
    ea, eb = math.exp(a - m), math.exp(b - m)
    return eb / (ea + eb)


def accept(u_current: float, u_candidate: float, temp: float, rng: np.random.Generator) -> bool:
    return bool(rng.random() < acceptance_probability(u_current, u_candidate, temp))


def _qos_eta_for(power, j, w_new, noise):
    """Eta of every user towards UAV j if j's received-power column were ``w_new``."""
    others = power.sum(axis=1) - power[:, j]
    return np.log2(1.0 + w_new / (noise + others))


def _sample_served(j: int, state: BlllState, scenario: Scenario, rng: np.random.Generator,
                   w_new: np.ndarray, mode: str = "uniform") -> np.ndarray:
    """Users UAV j would serve from the candidate position.

    ``uniform`` draws a fresh subset of size uniform over 0..min(N_j, pool);
    ``local`` keeps j's current users that still meet QoS and adds, drops, or
    swaps a single user.
    """
    quota = int(scenario.quotas[j])
    if quota == 0:
        return np.empty(0, dtype=int)
    eta = _qos_eta_for(state.power, j, w_new, scenario.channel.noise_w)
    ok = eta >= scenario.eta_min
    if mode == "uniform":
        free = (state.serving == -1) | (state.serving == j)
        pool = np.nonzero(free & ok)[0]
        size = int(rng.integers(min(quota, len(pool)) + 1))
        if size == 0:
            return np.empty(0, dtype=int)
        return np.sort(rng.choice(pool, size=size, replace=False))
    kept = np.nonzero((state.serving == j) & ok)[0]
    pool = np.nonzero((state.serving == -1) & ok)[0]
    move = int(rng.integers(3))  # 0 add, 1 drop, 2 swap
    if move == 0 and len(kept) < quota and len(pool):
        kept = np.append(kept, pool[rng.integers(len(pool))])
    elif move == 1 and len(kept):
        kept = np.delete(kept, rng.integers(len(kept)))
    elif move == 2 and len(kept) and len(pool):
        kept = kept.copy()
        kept[rng.integers(len(kept))] = pool[rng.integers(len(pool))]
    return np.sort(kept)


def propose(j: int, state: BlllState, scenario: Scenario, rng: np.random.Generator,
            links: _Links | None = None, lazy: bool = False,
            assoc_mode: str = "uniform") -> Candidate:
    """Axis-neighbour move plus a uniformly resampled served-user set.

    The served set is drawn from unassociated users and j's own users that
    meet the QoS floor at the candidate position; its size is uniform over
    0..min(N_j, pool size). With ``lazy`` the current location joins the
    candidate locations, so the served set can change without moving.
    """
    links = links or _Links(scenario)
    current = int(state.grid_indices[j])
    options = scenario.grid.neighbors(current)
    if not scenario.allow_collocation:
        taken = {int(g) for k, g in enumerate(state.grid_indices) if k != j}
        options = [g for g in options if g not in taken]
    if lazy:
        options.append(current)
    target = options[int(rng.integers(len(options)))] if options else current
    served = _sample_served(j, state, scenario, rng, links.power(j, target), assoc_mode)
    return Candidate(target, served)


def _apply(state: BlllState, j: int, cand: Candidate, w_new) -> tuple[np.ndarray, np.ndarray]:
    power = state.power.copy()
    power[:, j] = w_new
    serving = state.serving.copy()
    serving[serving == j] = -1
    serving[cand.served] = j
    return power, serving


def _drop_failing(scenario: Scenario, power, serving) -> np.ndarray:
    rows, _, eta = _served_eta(power, serving, scenario.channel.noise_w)
    out = serving.copy()
    out[rows[eta < scenario.eta_min]] = -1
    return out


def random_state(scenario: Scenario, rng: np.random.Generator, links: _Links | None = None,
                 associate: bool = False) -> BlllState:
    """Random grid placement; optionally a random feasible association."""
    links = links or _Links(scenario)
    J, L = scenario.n_uavs, scenario.grid.size
    idx = rng.choice(L, size=J, replace=scenario.allow_collocation)
    power = np.stack([links.power(j, int(idx[j])) for j in range(J)], axis=1)
    serving = np.full(scenario.n_users, -1, dtype=int)
    state = BlllState(scenario, np.asarray(idx, dtype=int), serving, power)
    if associate:
        for j in rng.permutation(J):
            served = _sample_served(int(j), state, scenario, rng, state.power[:, j])
            state.serving[state.serving == j] = -1
            state.serving[served] = j
        state.serving = _drop_failing(scenario, state.power, state.serving)
    state.sum_rate = network_sum_rate(scenario, state.power, state.serving)
    state.best_grid_indices = state.grid_indices.copy()
    state.best_serving = state.serving.copy()
    state.best_sum_rate = state.sum_rate
    return state


def estimate_t0(scenario: Scenario, rng: np.random.Generator, n_states: int = 100) -> float:
    """Standard deviation of the sum-rate over random feasible states.

    Falls back to 1 bit/s when every sampled state has the same value.
    """
    links = _Links(scenario)
    values = [random_state(scenario, rng, links, associate=True).sum_rate
              for _ in range(n_states)]
    spread = float(np.std(values))
    return spread if spread > 0 else 1.0


def effective_range(scenario: Scenario, range_m: float | None) -> float | None:
    """None when the range covers the whole grid, so every UAV neighbours every other."""
    if range_m is not None and range_m >= scenario.grid.diagonal:
        return None
    return range_m


def output_sum_rate(state: BlllState, config: BlllConfig) -> float:
    """Sum-rate of the state a run hands back.

    With full-range utilities every UAV evaluates the network sum-rate, so
    the best visited state is known and can be returned. Range-limited UAVs
    never observe the global value; their output is the last state.
    """
    if effective_range(state.scenario, config.neighborhood_range_m) is None:
        return state.best_sum_rate
    return state.sum_rate


def run(scenario: Scenario, config: BlllConfig) -> tuple[BlllState, list[TraceRecord]]:
    seq = np.random.SeedSequence(config.seed)
    warm_seed, init_seed, main_seed = seq.spawn(3)
    t0 = config.t0
    if t0 is None:
        t0 = estimate_t0(scenario, np.random.default_rng(warm_seed), config.warmup_states)
    links = _Links(scenario)
    state = random_state(scenario, np.random.default_rng(init_seed), links)
    rng = np.random.default_rng(main_seed)
    points = links.points
    range_m = effective_range(scenario, config.neighborhood_range_m)
    J = scenario.n_uavs
    trace: list[TraceRecord] = []

    def movers():
        if config.activation == "uniform_single":
            while True:
                yield int(rng.integers(J))
        else:
            while True:
                for j in range(J):
                    if rng.random() > 0.5:
                        yield j

    schedule = movers()
    for t in range(1, config.max_iters + 1):
        j = next(schedule)
        temp = temperature(t0, t, config.cooling)
        cand = propose(j, state, scenario, rng, links, config.lazy_moves,
                       config.assoc_proposal)
        w_new = links.power(j, cand.grid_index)
        power_c, serving_c = _apply(state, j, cand, w_new)
        sum_c = network_sum_rate(scenario, power_c, serving_c)
        if range_m is None:
            # the network-without-j term does not depend on j's action
            without_j = _sum_served(scenario, state.power, state.serving, removed=j)
            u_cur = state.sum_rate - without_j
            u_cand = sum_c - without_j
        else:
            pos = points[state.grid_indices]
            pos_c = pos.copy()
            pos_c[j] = points[cand.grid_index]
            u_cur = utility(scenario, state.power, state.serving, j, pos, range_m)
            u_cand = utility(scenario, power_c, serving_c, j, pos_c, range_m)
        accepted = accept(u_cur, u_cand, temp, rng)
        if accepted:
            state.grid_indices[j] = cand.grid_index
            state.power = power_c
            state.serving = _drop_failing(scenario, power_c, serving_c)
            state.sum_rate = sum_c
            if state.sum_rate > state.best_sum_rate:
                state.best_sum_rate = state.sum_rate
                state.best_grid_indices = state.grid_indices.copy()
                state.best_serving = state.serving.copy()
        state.iteration = t
        trace.append(TraceRecord(t, temp, j, int(accepted), state.sum_rate, state.best_sum_rate))
    state.t0 = t0
    return state, trace
