from functools import lru_cache

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from uavplace import greedy, oracle, scenarios
from uavplace.model import Association, Placement
from uavplace.objective import sum_rate
from uavplace.oracle import BudgetExceeded, OracleBudget

from conftest import make_scenario


def _dp_best(rates, ok, quotas):
    """Independent DP over (user index, remaining quota vector)."""
    I, J = rates.shape

    @lru_cache(maxsize=None)
    def go(i, left):
        if i == I:
            return 0.0
        best = go(i + 1, left)
        for j in range(J):
            if ok[i, j] and left[j] > 0:
                nxt = list(left)
                nxt[j] -= 1
                best = max(best, rates[i, j] + go(i + 1, tuple(nxt)))
        return best

    return go(0, tuple(int(q) for q in quotas))


def _lsa_best(rates, ok, quotas):
    """Assignment with each UAV expanded into N_j identical slots."""
    cols = [j for j, q in enumerate(quotas) for _ in range(int(q))]
    if not cols:
        return 0.0
    w = np.where(ok, rates, 0.0)[:, cols]
    r, c = linear_sum_assignment(w, maximize=True)
    return float(w[r, c].sum())


def test_single_link():
    s = make_scenario([(60, 40)], n_uavs=1, quota=1)
    p = Placement(((50, 50, 100),))
    assoc, value = oracle.best_association(p, s)
    rates, _ = greedy.config_rates(p.array[None], s)
    assert assoc.pairs() == [(0, 0)] and value == rates[0, 0, 0]


def test_zero_quota_gives_empty_association():
    s = scenarios.desk(quota=0)
    assoc, value = oracle.best_association(Placement.from_indices(s.grid, [0, 1]), s)
    assert assoc == Association.empty(4, 2) and value == 0.0


@pytest.mark.parametrize("seed", range(8))
def test_matches_dp_and_assignment_solvers(seed):
    s = scenarios.desk(seed=seed, n_users=5, n_uavs=3, quota=2)
    rng = np.random.default_rng(seed)
    for _ in range(6):
        p = greedy.random_placement(s, rng)
        rates, ok = greedy.config_rates(p.array[None], s)
        assoc, value = oracle.best_association(p, s)
        assert value == pytest.approx(_dp_best(rates[0], ok[0], s.quotas), rel=1e-12)
        assert value == pytest.approx(_lsa_best(rates[0], ok[0], s.quotas), rel=1e-12)
        assert sum_rate(assoc, p, s) == pytest.approx(value, rel=1e-12)


def test_global_optimum_is_max_over_configs():
    s = scenarios.desk(seed=3)
    p, q, v = oracle.global_optimum(s)
    values = [oracle.best_association(c, s)[1] for c in greedy.exhaustive_configs(s)]
    assert v == max(values)
    assert sum_rate(q, p, s) == pytest.approx(v, rel=1e-12)


def test_symmetric_instance_returns_lexicographically_first():
    # users mirrored about the grid's centre: swapping UAVs gives the same value
    s = make_scenario([(60, 60), (140, 140)], n_uavs=2, quota=1)
    p, q, v = oracle.global_optimum(s)
    configs = greedy.exhaustive_configs(s)
    values = [oracle.best_association(c, s)[1] for c in configs]
    optimal = [k for k, x in enumerate(values) if x == v]
    assert len(optimal) >= 2
    assert p == configs[optimal[0]]
    mirrored = Placement((p.positions[1], p.positions[0]))
    assert oracle.best_association(mirrored, s)[1] == pytest.approx(v, rel=1e-12)


def test_budget_refusals_report_the_count():
    s = scenarios.desk()
    with pytest.raises(BudgetExceeded) as err:
        oracle.global_optimum(s, OracleBudget(max_configs=10))
    assert err.value.count == 56
    with pytest.raises(BudgetExceeded):
        oracle.best_association(Placement.from_indices(s.grid, [0, 7]), s,
                                OracleBudget(max_assoc_states=2))
    with pytest.raises(BudgetExceeded):
        oracle.global_optimum(scenarios.table2())
