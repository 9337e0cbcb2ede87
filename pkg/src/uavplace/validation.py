"""Property suite run by ``uavplace run --algo validate`` on desk instances."""

from __future__ import annotations

import math

import numpy as np

from . import blll, greedy, oracle
from .model import Association, Placement, Scenario, feasible
from .objective import potential_identity

BOUND = 1.0 - 1.0 / math.e


def random_unilateral_pair(scenario: Scenario, rng: np.random.Generator):
    """A random feasible state and a random unilateral deviation of one UAV.

    Returns ``(j, a, a_prime)`` with states as (Placement, Association).
    """
    links = blll._Links(scenario)
    state = blll.random_state(scenario, rng, links, associate=True)
    j = int(rng.integers(scenario.n_uavs))
    cand = blll.propose(j, state, scenario, rng, links, lazy=True)
    power, serving = blll._apply(state, j, cand, links.power(j, cand.grid_index))
    grid_c = state.grid_indices.copy()
    grid_c[j] = cand.grid_index
    a = (state.placement, state.association)
    a_prime = (Placement.from_indices(scenario.grid, grid_c),
               Association.from_serving(serving, scenario.n_uavs))
    return j, a, a_prime


def check_potential(scenario: Scenario, samples: int, rng: np.random.Generator,
                    rel_tol: float = 1e-9) -> dict:
    from .objective import sum_rate

    worst, bad = 0.0, 0
    for _ in range(samples):
        j, a, a_prime = random_unilateral_pair(scenario, rng)
        res = potential_identity(j, a, a_prime, scenario)
        scale = max(abs(sum_rate(a[1], a[0], scenario, checked=False)),
                    abs(sum_rate(a_prime[1], a_prime[0], scenario, checked=False)), 1.0)
        worst = max(worst, res / scale)
        bad += res > rel_tol * scale
    return {"checked": samples, "violations": int(bad), "max_relative_residual": worst}


def check_greedy_bound(scenario: Scenario, opt_value: float) -> dict:
    res = greedy.greedy_over_configs(greedy.exhaustive_configs(scenario), scenario)
    ok = res.sum_rate >= BOUND * opt_value
    return {"checked": 1, "violations": int(not ok), "greedy": res.sum_rate,
            "optimum": opt_value, "ratio": res.sum_rate / opt_value if opt_value else 1.0,
            "result": res}


def check_submodularity(scenario: Scenario, configs: greedy.ConfigurationSet,
                        limit: int = 12) -> dict:
    checked = bad = skipped = 0
    for placement in configs:
        if len(greedy.ground_set(placement, scenario)) > limit:
            skipped += 1
            continue
        rep = greedy.check_submodular_monotone(placement, scenario, limit)
        checked += rep.checked
        bad += len(rep.violations)
    return {"checked": checked, "violations": bad, "configs_skipped": skipped}


def validate(scenario: Scenario, seed: int, potential_samples: int = 200,
             blll_iters: int = 20_000) -> dict:
    """Run every property check; ``report["violations"]`` is the total count."""
    rng = np.random.default_rng(seed)
    report: dict = {}
    report["potential_identity"] = check_potential(scenario, potential_samples, rng)

    p_opt, q_opt, v_opt = oracle.global_optimum(scenario)
    report["optimum"] = {"placement": [list(p) for p in p_opt.positions],
                         "association": q_opt.pairs(), "sum_rate_bps": v_opt}

    bound = check_greedy_bound(scenario, v_opt)
    g = bound.pop("result")
    report["greedy_bound"] = bound

    configs = greedy.exhaustive_configs(scenario)
    report["submodularity"] = check_submodularity(scenario, configs)
    mat = greedy.check_partition_matroid(configs, scenario, 200, rng)
    report["partition_matroid"] = {"checked": mat.checked, "violations": len(mat.violations)}

    adapted = greedy.adapted_greedy(scenario)
    state, _ = blll.run(scenario, blll.BlllConfig(max_iters=blll_iters, seed=seed))
    outputs = {
        "greedy": (g.placement, g.association, g.sum_rate),
        "adapted_greedy": (adapted.placement, adapted.association, adapted.sum_rate),
        "blll": (state.best_placement, state.best_association, state.best_sum_rate),
    }
    tol = 1e-9 * max(v_opt, 1.0)
    dom_bad = sum(v > v_opt + tol for _, _, v in outputs.values())
    feas_bad = sum(not feasible(q, p, scenario) for p, q, _ in outputs.values())
    report["oracle_dominance"] = {"checked": len(outputs), "violations": dom_bad,
                                  "values": {k: v for k, (_, _, v) in outputs.items()}}
    report["feasibility"] = {"checked": len(outputs), "violations": feas_bad}
    report["violations"] = sum(
        v["violations"] for v in report.values() if isinstance(v, dict) and "violations" in v
    )
    return report
