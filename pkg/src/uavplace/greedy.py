"""Greedy association over UAV configurations, the k-means configuration
reduction, the sequential adapted greedy, and property checkers for the
per-configuration set function.

Under a fixed configuration the interference every user sees is fixed, so
each (user, UAV) pair has a constant rate and the per-configuration set
function is a sum of pair rates subject to quotas.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel
from .model import Association, InstanceError, Placement, Scenario

PROVENANCE = ("explicit", "exhaustive", "kmeans_reduced")


class ConfigurationSet:
    """Ordered, non-empty list of placements stored as a ``(K, J, 3)`` array."""

    def __init__(self, positions, provenance: str = "explicit"):
        arr = np.asarray(positions, dtype=float)
        if arr.ndim != 3 or arr.shape[-1] != 3 or len(arr) == 0:
            raise InstanceError("configurations must be a non-empty (K, J, 3) array")
        if provenance not in PROVENANCE:
            raise InstanceError(f"provenance must be one of {PROVENANCE}")
        arr.setflags(write=False)
        self.positions = arr
        self.provenance = provenance

    @classmethod
    def from_placements(cls, placements, provenance: str = "explicit") -> "ConfigurationSet":
        return cls([p.array for p in placements], provenance)

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, k: int) -> Placement:
        return Placement.from_array(self.positions[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def validate(self, scenario: Scenario) -> None:
        grid = scenario.grid
        if self.positions.shape[1] != scenario.n_uavs:
            raise InstanceError("configuration UAV count does not match the scenario")
        for k, placement in enumerate(self):
            idx = placement.grid_indices(grid)
            if any(i is None for i in idx):
                raise InstanceError(f"configuration {k} has an off-grid position")
            if not scenario.allow_collocation and len(set(idx)) != len(idx):
                raise InstanceError(f"configuration {k} collocates UAVs")

    def to_json(self) -> str:
        return json.dumps({"provenance": self.provenance,
                           "placements": self.positions.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ConfigurationSet":
        data = json.loads(text)
        if isinstance(data, list):
            return cls(data, "explicit")
        return cls(data["placements"], data.get("provenance", "explicit"))

    @classmethod
    def load(cls, path) -> "ConfigurationSet":
        return cls.from_json(Path(path).read_text())


def exhaustive_configs(scenario: Scenario, limit: int = 1_000_000) -> ConfigurationSet:
    """Every ordered assignment of UAVs to grid points (distinct unless collocation
    is allowed), in lexicographic order of grid indices."""
    L, J = scenario.grid.size, scenario.n_uavs
    count = L**J if scenario.allow_collocation else math.perm(L, J)
    if count > limit:
        raise InstanceError(f"{count} configurations exceed the limit of {limit}")
    pts = scenario.grid.points()
    it = (itertools.product(range(L), repeat=J) if scenario.allow_collocation
          else itertools.permutations(range(L), J))
    idx = np.array(list(it), dtype=int).reshape(-1, J)
    return ConfigurationSet(pts[idx], "exhaustive")


@dataclass
class GreedyResult:
    best_index: int
    association: Association
    sum_rate: float
    values: list[float]
    iterations: int
    placement: Placement = None
    configs: ConfigurationSet = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "best_index": self.best_index,
            "placement": [list(p) for p in self.placement.positions],
            "association": self.association.pairs(),
            "sum_rate_bps": self.sum_rate,
            "iterations": self.iterations,
            "per_configuration_values": self.values,
        }


def config_rates(positions, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Rates and QoS mask for a batch of configurations, each ``(B, I, J)``."""
    eta = channel.spectral_efficiency_matrix(positions, scenario)
    return eta * scenario.bandwidths, eta >= scenario.eta_min


def greedy_assign_batch(rates: np.ndarray, ok: np.ndarray, quotas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Greedy pair selection for a batch of rate tables.

    Each round picks, per configuration, the highest-rate pair whose user is
    unassociated, whose UAV is below quota and which meets QoS; ties go to
    the lowest user then UAV index. Returns (serving (B, I), value (B,),
    selection count (B,)).
    """
    B, I, J = rates.shape
    quotas = np.asarray(quotas)
    cand = np.where(ok & (quotas > 0), rates, -np.inf).reshape(B, I * J)
    serving = np.full((B, I), -1, dtype=int)
    load = np.zeros((B, J), dtype=int)
    value = np.zeros(B)
    steps = np.zeros(B, dtype=int)
    active = np.arange(B)
    for _ in range(min(I, int(quotas.sum()))):
        if len(active) == 0:
            break
        sub = cand[active]
        pick = np.argmax(sub, axis=1)
        best = sub[np.arange(len(active)), pick]
        live = best > -np.inf
        active, pick, best = active[live], pick[live], best[live]
        if len(active) == 0:
            break
        users, uavs = np.divmod(pick, J)
        serving[active, users] = uavs
        value[active] += best
        steps[active] += 1
        load[active, uavs] += 1
        view = cand.reshape(B, I, J)
        view[active, users, :] = -np.inf
        full = load[active, uavs] >= quotas[uavs]
        view[active[full], :, uavs[full]] = -np.inf
    return serving, value, steps


def greedy_per_config(placement: Placement, scenario: Scenario) -> tuple[Association, float]:
    rates, ok = config_rates(placement.array[None], scenario)
    serving, value, _ = greedy_assign_batch(rates, ok, scenario.quotas)
    return Association.from_serving(serving[0], scenario.n_uavs), float(value[0])


def greedy_over_configs(configs: ConfigurationSet, scenario: Scenario,
                        batch: int = 4096) -> GreedyResult:
    """Run the per-configuration greedy on every configuration; keep the best
    (first occurrence on ties)."""
    values = np.empty(len(configs))
    iterations = 0
    best_k, best_val, best_serving = 0, -np.inf, None
    for start in range(0, len(configs), batch):
        pos = configs.positions[start:start + batch]
        rates, ok = config_rates(pos, scenario)
        serving, value, steps = greedy_assign_batch(rates, ok, scenario.quotas)
        values[start:start + len(pos)] = value
        iterations += int(steps.sum())
        k = int(np.argmax(value))
        if value[k] > best_val:
            best_k, best_val, best_serving = start + k, float(value[k]), serving[k]
    return GreedyResult(
        best_index=best_k,
        association=Association.from_serving(best_serving, scenario.n_uavs),
        sum_rate=best_val,
        values=values.tolist(),
        iterations=iterations,
        placement=configs[best_k],
        configs=configs,
    )


def random_placement(scenario: Scenario, rng: np.random.Generator) -> Placement:
    idx = rng.choice(scenario.grid.size, size=scenario.n_uavs,
                     replace=scenario.allow_collocation)
    return Placement.from_indices(scenario.grid, idx)


def kmeans_2d(scenario: Scenario, n_rounds: int = 20, initial: Placement | None = None,
              rng: np.random.Generator | None = None) -> list[tuple[float, float]]:
    """SINR-driven k-means: users join the UAV giving them the best spectral
    efficiency, UAVs move to their cluster barycentre. Heights stay at the
    initial placement's values. Returns J grid-snapped 2D centres."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if initial is None:
        initial = random_placement(scenario, rng or np.random.default_rng(scenario.rng_seed))
    pos = initial.array.copy()
    users = scenario.users_xy
    for _ in range(n_rounds):
        eta = channel.spectral_efficiency_matrix(pos, scenario)
        label = np.argmax(eta, axis=1)
        new = pos.copy()
        for j in range(scenario.n_uavs):
            members = users[label == j]
            if len(members):
                new[j, :2] = members.mean(axis=0)
        if np.array_equal(new, pos):
            break
        pos = new
    return [scenario.grid.snap_xy(x, y) for x, y in pos[:, :2]]


def kmeans_configs(scenario: Scenario, centers, permute: bool = False) -> ConfigurationSet:
    """Configurations formed by the 2D centres and every height combination.

    Identity mapping gives UAV j centre j (|H|^J configurations); ``permute``
    also enumerates every bijection of centres to UAVs.
    """
    J = scenario.n_uavs
    hs = scenario.grid.hs
    centers = np.asarray(centers, dtype=float)
    orders = itertools.permutations(range(J)) if permute else [tuple(range(J))]
    heights = np.array(list(itertools.product(hs, repeat=J)), dtype=float)
    blocks = []
    for order in orders:
        xy = centers[list(order)]
        block = np.empty((len(heights), J, 3))
        block[:, :, :2] = xy
        block[:, :, 2] = heights
        blocks.append(block)
    pos = np.concatenate(blocks)
    if not scenario.allow_collocation:
        keep = np.ones(len(pos), dtype=bool)
        for a, b in itertools.combinations(range(J), 2):
            keep &= ~np.all(pos[:, a] == pos[:, b], axis=1)
        pos = pos[keep]
    return ConfigurationSet(pos, "kmeans_reduced")


def combined_kmeans_greedy(scenario: Scenario, rng: np.random.Generator,
                           n_rounds: int = 20, permute: bool = False,
                           initial: Placement | None = None) -> GreedyResult:
    centers = kmeans_2d(scenario, n_rounds, initial, rng)
    return greedy_over_configs(kmeans_configs(scenario, centers, permute), scenario)


@dataclass
class AdaptedResult:
    placement: Placement
    association: Association
    sum_rate: float
    trace: list[tuple[int, int, float]]  # (iteration, uav, running value)
    iterations: int
    order: list[int]


def adapted_greedy(scenario: Scenario, chunk: int = 16384,
                   interference: str = "placed") -> AdaptedResult:
    """Place UAVs one at a time in decreasing-quota order.

    Each UAV takes the free grid point maximising the sum of the best
    min(N_j, remaining) QoS-satisfying rates among unassociated users, with
    interference from already-placed UAVs only, and keeps those users.
    The returned association drops links that fail QoS once every UAV is
    in the air.
    """
    grid = scenario.grid
    pts = grid.points()
    users = scenario.users_xy
    noise = scenario.channel.noise_w
    order = sorted(range(scenario.n_uavs), key=lambda j: (-scenario.quotas[j], j))
    placed_power = np.zeros(scenario.n_users)
    free_users = np.ones(scenario.n_users, dtype=bool)
    taken = np.zeros(grid.size, dtype=bool)
    chosen: dict[int, int] = {}
    serving = np.full(scenario.n_users, -1, dtype=int)
    running, trace = 0.0, []
    for it, j in enumerate(order, start=1):
        seen = placed_power if interference == "placed" else np.zeros_like(placed_power)
        quota = int(scenario.quotas[j])
        cand_users = np.nonzero(free_users)[0]
        m = min(quota, len(cand_users))
        best_val, best_idx = -np.inf, -1
        for start in range(0, grid.size, chunk):
            block = pts[start:start + chunk]
            power = channel.gain_matrix(block, users[cand_users], scenario.channel)
            power = power * scenario.powers_w[j]  # (I_free, B)
            eta = np.log2(1.0 + power / (noise + seen[cand_users, None]))
            rate = np.where(eta >= scenario.eta_min, eta * scenario.bandwidths[j], 0.0)
            if m == 0:
                vals = np.zeros(len(block))
            elif m < len(cand_users):
                vals = -np.partition(-rate, m - 1, axis=0)[:m].sum(axis=0)
            else:
                vals = rate.sum(axis=0)
            if not scenario.allow_collocation:
                vals = np.where(taken[start:start + len(block)], -np.inf, vals)
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_idx = float(vals[k]), start + k
        chosen[j] = best_idx
        taken[best_idx] = True
        power = channel.gain_matrix(pts[best_idx][None], users, scenario.channel)[:, 0]
        power = power * scenario.powers_w[j]
        if m:
            eta = np.log2(1.0 + power[cand_users] / (noise + seen[cand_users]))
            rate = np.where(eta >= scenario.eta_min, eta * scenario.bandwidths[j], 0.0)
            ranked = cand_users[np.argsort(-rate, kind="stable")][:m]
            ranked = ranked[rate[np.searchsorted(cand_users, ranked)] > 0]
            serving[ranked] = j
            free_users[ranked] = False
        placed_power += power
        running += max(best_val, 0.0)
        trace.append((it, j, running))
    placement = Placement.from_indices(grid, [chosen[j] for j in range(scenario.n_uavs)])
    eta = channel.spectral_efficiency_matrix(placement.array, scenario)
    rows = np.nonzero(serving >= 0)[0]
    fail = rows[eta[rows, serving[rows]] < scenario.eta_min]
    serving[fail] = -1
    rows = np.nonzero(serving >= 0)[0]
    total = float((eta[rows, serving[rows]] * scenario.bandwidths[serving[rows]]).sum())
    return AdaptedResult(placement, Association.from_serving(serving, scenario.n_uavs),
                         total, trace, len(order), order)


# ---------------------------------------------------------------------------
# property checks for the per-configuration set function


def quota_value(elements, rates, ok, quotas) -> float:
    """Set-function value of a collection of (user, uav) pairs under one
    configuration: per UAV, the QoS-satisfying pairs compete for its quota
    and only the best N_j rates count (a new pair at quota displaces the
    lowest-efficiency incumbent)."""
    per_uav: dict[int, list[float]] = {}
    for i, j in elements:
        if ok[i, j]:
            per_uav.setdefault(j, []).append(rates[i, j])
    total = 0.0
    for j, vals in per_uav.items():
        total += sum(sorted(vals, reverse=True)[: int(quotas[j])])
    return total


@dataclass
class PropertyReport:
    checked: int
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def ground_set(placement: Placement, scenario: Scenario) -> list[tuple[int, int]]:
    """(user, uav) pairs of one configuration that meet the QoS floor."""
    rates, ok = config_rates(placement.array[None], scenario)
    return [(i, j) for i in range(scenario.n_users) for j in range(scenario.n_uavs)
            if ok[0, i, j]]


def check_submodular_monotone(placement: Placement, scenario: Scenario,
                              exhaustive_limit: int = 12, value_fn=None,
                              max_witnesses: int = 10) -> PropertyReport:
    """Exhaustively verify monotonicity and diminishing returns on all chains
    A <= B of user-feasible subsets and feasible additions a.

    ``value_fn(elements) -> float`` replaces the default set function (used
    for negative controls).
    """
    rates, ok = config_rates(placement.array[None], scenario)
    rates, ok = rates[0], ok[0]
    V = ground_set(placement, scenario)
    if len(V) > exhaustive_limit:
        raise InstanceError(f"ground set has {len(V)} elements > limit {exhaustive_limit}")
    if value_fn is None:
        def value_fn(elements):
            return quota_value(elements, rates, ok, scenario.quotas)

    memo: dict[frozenset, float] = {}

    def f(s: frozenset) -> float:
        if s not in memo:
            memo[s] = value_fn(sorted(s))
        return memo[s]

    # user-feasible subsets: each user appears at most once
    by_user: dict[int, list] = {}
    for e in V:
        by_user.setdefault(e[0], []).append(e)
    choices = [[None] + opts for opts in by_user.values()]
    feasible_sets = [frozenset(e for e in combo if e is not None)
                     for combo in itertools.product(*choices)]
    tol = 1e-9
    checked, bad = 0, []
    for B in feasible_sets:
        fB = f(B)
        used = {i for i, _ in B}
        addable = [e for e in V if e[0] not in used]
        Bl = sorted(B)
        for r in range(len(Bl) + 1):
            for A in itertools.combinations(Bl, r):
                A = frozenset(A)
                fA = f(A)
                checked += 1
                if fA > fB + tol * max(1.0, abs(fB)):
                    bad.append({"kind": "monotone", "A": sorted(A), "B": Bl,
                                "f(A)": fA, "f(B)": fB})
                for a in addable:
                    gain_a = f(A | {a}) - fA
                    gain_b = f(B | {a}) - fB
                    checked += 1
                    if gain_a < gain_b - tol * max(1.0, abs(fB)):
                        bad.append({"kind": "submodular", "A": sorted(A), "B": Bl,
                                    "a": a, "gain_A": gain_a, "gain_B": gain_b})
                if len(bad) >= max_witnesses:
                    return PropertyReport(checked, bad)
    return PropertyReport(checked, bad)


def live_interference_value(placement: Placement, scenario: Scenario):
    """Set function whose interference depends on which UAVs are serving in
    the set itself, i.e. not fixed by the configuration. Breaks the
    structure the greedy guarantee relies on; used as a negative control."""
    power = channel.rx_power_matrix(placement.array, scenario)
    noise = scenario.channel.noise_w

    def value(elements) -> float:
        active = sorted({j for _, j in elements})
        total = 0.0
        for i, j in elements:
            interf = sum(power[i, k] for k in active if k != j)
            total += scenario.bandwidths[j] * math.log2(1.0 + power[i, j] / (noise + interf))
        return total

    return value


def check_partition_matroid(configs: ConfigurationSet, scenario: Scenario, sample: int,
                            rng: np.random.Generator) -> PropertyReport:
    """Sample independent sets of the one-configuration constraint and verify
    the hereditary and augmentation axioms for same-configuration sets.

    Ground elements are (user, uav, configuration) triples; a set is
    independent when all its elements share one configuration and it holds
    at most min(I, sum N_j) elements.
    """
    I, J, K = scenario.n_users, scenario.n_uavs, len(configs)
    cap = min(I, int(scenario.quotas.sum()))
    blocks = [[(i, j, k) for i in range(I) for j in range(J)] for k in range(K)]

    def independent(s) -> bool:
        return len({e[2] for e in s}) <= 1 and len(s) <= cap

    def draw(k, size):
        block = blocks[k]
        pick = rng.choice(len(block), size=size, replace=False)
        return frozenset(block[p] for p in pick)

    bad, checked = [], 0
    if not independent(frozenset()):
        bad.append({"kind": "empty"})
    for _ in range(sample):
        k = int(rng.integers(K))
        big = draw(k, int(rng.integers(cap + 1)))
        checked += 1
        if not independent(big):
            bad.append({"kind": "sampler", "set": sorted(big)})
            continue
        sub = frozenset(e for e in big if rng.random() < 0.5)
        if not independent(sub):
            bad.append({"kind": "hereditary", "set": sorted(big), "subset": sorted(sub)})
        if len(big) == 0:
            continue
        small = draw(k, int(rng.integers(len(big))))
        if not any(independent(small | {e}) for e in big - small):
            bad.append({"kind": "augmentation", "I": sorted(big), "J": sorted(small)})
    return PropertyReport(checked, bad)
