"""Exhaustive ground truth for desk-scale instances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .greedy import config_rates, exhaustive_configs
from .model import Association, InstanceError, Placement, Scenario


class BudgetExceeded(InstanceError):
    def __init__(self, what: str, count: int, limit: int):
        super().__init__(f"{what}: {count} states exceed budget {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True)
class OracleBudget:
    max_configs: int = 10_000
    max_assoc_states: int = 1_000_000

    def __post_init__(self):
        if self.max_configs < 1 or self.max_assoc_states < 1:
            raise InstanceError("oracle budgets must be >= 1")


def _best_from_rates(rates, ok, quotas, max_states: int) -> tuple[list[int], float]:
    """Depth-first search over per-user choices (unassigned first, then UAVs
    in index order); the first maximum found wins."""
    I, J = rates.shape
    options = [[-1] + [j for j in range(J) if ok[i, j] and quotas[j] > 0] for i in range(I)]
    states = 1
    for opts in options:
        states *= len(opts)
    if states > max_states:
        raise BudgetExceeded("association search", states, max_states)
    r = rates.tolist()
    load = [0] * J
    choice = [-1] * I
    best = [-1.0, [-1] * I]

    def dfs(i: int, acc: float) -> None:
        if i == I:
            if acc > best[0]:
                best[0] = acc
                best[1] = choice.copy()
            return
        for j in options[i]:
            if j < 0:
                dfs(i + 1, acc)
            elif load[j] < quotas[j]:
                load[j] += 1
                choice[i] = j
                dfs(i + 1, acc + r[i][j])
                choice[i] = -1
                load[j] -= 1

    dfs(0, 0.0)
    return best[1], best[0]


def best_association(placement: Placement, scenario: Scenario,
                     budget: OracleBudget = OracleBudget()) -> tuple[Association, float]:
    """Exact best feasible association for a fixed placement."""
    rates, ok = config_rates(placement.array[None], scenario)
    serving, value = _best_from_rates(rates[0], ok[0], scenario.quotas.tolist(),
                                      budget.max_assoc_states)
    return Association.from_serving(serving, scenario.n_uavs), value


def global_optimum(scenario: Scenario, budget: OracleBudget = OracleBudget()
                   ) -> tuple[Placement, Association, float]:
    """Exact best (placement, association) over the whole grid.

    Placements are scanned in lexicographic grid-index order and the first
    optimum is returned.
    """
    L, J = scenario.grid.size, scenario.n_uavs
    count = L**J if scenario.allow_collocation else math.perm(L, J)
    if count > budget.max_configs:
        raise BudgetExceeded("placement search", count, budget.max_configs)
    configs = exhaustive_configs(scenario, limit=budget.max_configs)
    rates, ok = config_rates(configs.positions, scenario)
    quotas = scenario.quotas.tolist()
    best_k, best_val, best_serving = 0, -1.0, None
    for k in range(len(configs)):
        serving, value = _best_from_rates(rates[k], ok[k], quotas, budget.max_assoc_states)
        if value > best_val:
            best_k, best_val, best_serving = k, value, serving
    return (configs[best_k],
            Association.from_serving(np.asarray(best_serving), scenario.n_uavs),
            best_val)
