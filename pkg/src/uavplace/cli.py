"""Command-line entry point.

Exit codes: 0 success, 1 validation found violations, 2 malformed input,
3 infeasible scenario, 4 search budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, blll, greedy, oracle, scenarios, validation
from .model import InfeasibleScenarioError, InstanceError, Placement, Scenario

log = logging.getLogger("uavplace")

ALGORITHMS = ("blll", "greedy", "kmeans_greedy", "adapted_greedy", "oracle", "validate")
TRACE_FIELDS = ("iter", "temperature", "mover", "accepted", "sum_rate_bps",
                "best_sum_rate_bps")
WORKERS_ENV = "UAVPLACE_WORKERS"

EXIT_OK, EXIT_VIOLATIONS, EXIT_MALFORMED, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4


@dataclass
class RunManifest:
    scenario: str
    algorithm: str
    out: str
    seed: int = 0
    blll: dict = field(default_factory=dict)
    greedy: dict = field(default_factory=dict)
    configs: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InstanceError(f"algorithm must be one of {ALGORITHMS}")
        if not Path(self.scenario).is_file():
            raise InstanceError(f"scenario file not found: {self.scenario}")
        if self.configs is not None and not Path(self.configs).is_file():
            raise InstanceError(f"configuration file not found: {self.configs}")
        if self.algorithm != "blll" and self.blll:
            raise InstanceError("blll block given for a non-BLLL algorithm")
        if not 0 <= self.seed < 2**64:
            raise InstanceError("seed must be a 64-bit unsigned integer")

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def write_trace(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _placement_json(p: Placement) -> list:
    return [list(pos) for pos in p.positions]


def _blll_config(manifest: RunManifest, scenario: Scenario) -> blll.BlllConfig:
    opts = dict(manifest.blll)
    frac = opts.pop("range_frac", None)
    if frac is not None:
        opts["neighborhood_range_m"] = range_from_fraction(scenario, frac)
    return blll.BlllConfig(seed=manifest.seed, **opts)


def range_from_fraction(scenario: Scenario, frac: float) -> float:
    if not 0.0 <= frac <= 1.0:
        raise InstanceError("range fraction must lie in [0, 1]")
    return frac * scenario.grid.diagonal


def execute(manifest: RunManifest, scenario: Scenario) -> tuple[dict, list, dict]:
    """Run one algorithm; returns (result, trace rows, resolved config)."""
    algo = manifest.algorithm
    if algo == "blll":
        cfg = _blll_config(manifest, scenario)
        state, trace = blll.run(scenario, cfg)
        resolved = asdict(cfg) | {"t0": state.t0}
        if blll.effective_range(scenario, cfg.neighborhood_range_m) is None:
            placement, assoc = state.best_placement, state.best_association
        else:
            placement, assoc = state.placement, state.association
        result = {
            "placement": _placement_json(placement),
            "association": assoc.pairs(),
            "sum_rate_bps": blll.output_sum_rate(state, cfg),
            "best_sum_rate_bps": state.best_sum_rate,
            "final_state_sum_rate_bps": state.sum_rate,
            "iterations": state.iteration,
        }
        return result, [tuple(r) for r in trace], resolved

    if algo in ("greedy", "kmeans_greedy"):
        opts = dict(manifest.greedy)
        if algo == "greedy":
            if manifest.configs:
                configs = greedy.ConfigurationSet.load(manifest.configs)
                configs.validate(scenario)
            else:
                configs = greedy.exhaustive_configs(scenario, opts.get("limit", 1_000_000))
            res = greedy.greedy_over_configs(configs, scenario)
        else:
            rng = np.random.default_rng(manifest.seed)
            res = greedy.combined_kmeans_greedy(
                scenario, rng, n_rounds=opts.get("n_rounds", 20),
                permute=opts.get("permute", False))
        running, rows = -np.inf, []
        for k, v in enumerate(res.values, start=1):
            running = max(running, v)
            rows.append((k, None, None, None, v, running))
        result = res.to_dict() | {"configurations": len(res.values),
                                  "provenance": res.configs.provenance}
        return result, rows, {"greedy": opts}

    if algo == "adapted_greedy":
        opts = dict(manifest.greedy)
        res = greedy.adapted_greedy(scenario, interference=opts.get("interference", "placed"))
        rows = [(it, None, None, None, v, v) for it, _, v in res.trace]
        result = {
            "placement": _placement_json(res.placement),
            "association": res.association.pairs(),
            "sum_rate_bps": res.sum_rate,
            "iterations": res.iterations,
            "order": res.order,
        }
        return result, rows, {"greedy": opts}

    if algo == "oracle":
        budget = oracle.OracleBudget(**manifest.greedy.get("budget", {}))
        p, q, v = oracle.global_optimum(scenario, budget)
        result = {"placement": _placement_json(p), "association": q.pairs(),
                  "sum_rate_bps": v, "iterations": 1}
        return result, [(1, None, None, None, v, v)], {"budget": asdict(budget)}

    report = validation.validate(scenario, manifest.seed)
    return report, [], {}


def run_manifest(manifest: RunManifest) -> int:
    try:
        scenario = scenarios.load(manifest.scenario)
    except InfeasibleScenarioError as exc:
        log.error("%s: infeasible scenario: %s", manifest.scenario, exc)
        return EXIT_INFEASIBLE
    except InstanceError as exc:
        log.error("%s: %s", manifest.scenario, exc)
        return EXIT_MALFORMED
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        result, rows, resolved = execute(manifest, scenario)
    except oracle.BudgetExceeded as exc:
        log.error("%s", exc)
        return EXIT_BUDGET
    except InstanceError as exc:
        log.error("%s", exc)
        return EXIT_MALFORMED
    wall = time.perf_counter() - start
    result = {"algorithm": manifest.algorithm, "seed": manifest.seed} | result
    write_trace(out / "trace.csv", rows)
    _dump_json(out / "result.json", result)
    _dump_json(out / "meta.json", {
        "version": __version__,
        "algorithm": manifest.algorithm,
        "seed": manifest.seed,
        "scenario_path": str(manifest.scenario),
        "scenario_sha256": hashlib.sha256(Path(manifest.scenario).read_bytes()).hexdigest(),
        "scenario": scenarios.to_dict(scenario),
        "config": resolved,
        "configs_path": manifest.configs,
        "wall_time_s": wall,
    })
    if "sum_rate_bps" in result:
        log.info("%s: sum-rate %.6g bit/s in %.2fs -> %s", manifest.algorithm,
                 result["sum_rate_bps"], wall, out)
    else:
        log.info("validate: %d violations in %.2fs -> %s", result["violations"], wall, out)
    if manifest.algorithm == "validate" and result["violations"]:
        return EXIT_VIOLATIONS
    return EXIT_OK


# ---------------------------------------------------------------------------
# neighbourhood-range sweep


def _sweep_cell(args) -> tuple[float, int, float, float, float]:
    scenario, frac, seed, iters, t0, assoc = args
    cfg = blll.BlllConfig(
        max_iters=iters, seed=seed, t0=t0, assoc_proposal=assoc,
        neighborhood_range_m=range_from_fraction(scenario, frac))
    state, _ = blll.run(scenario, cfg)
    return frac, seed, blll.output_sum_rate(state, cfg), state.sum_rate, state.best_sum_rate


def sweep_neighborhood_range(scenario: Scenario, ranges, seeds, iters: int = 20_000,
                             t0: float | None = None, assoc_proposal: str = "uniform",
                             workers: int | None = None, baseline_seed: int = 0) -> list[dict]:
    """Mean/std of the BLLL output sum-rate per range fraction, with the
    k-means greedy and adapted greedy values as constant baseline columns.

    The output is the best visited state at full range and the last state
    otherwise (see ``blll.output_sum_rate``); both raw means are also listed.
    """
    ranges, seeds = list(ranges), list(seeds)
    if not seeds:
        return []
    for frac in ranges:
        range_from_fraction(scenario, frac)
    workers = workers or int(os.environ.get(WORKERS_ENV, "1"))
    cells = [(scenario, f, s, iters, t0, assoc_proposal) for f in ranges for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    kg = greedy.combined_kmeans_greedy(scenario, np.random.default_rng(baseline_seed)).sum_rate
    ag = greedy.adapted_greedy(scenario).sum_rate
    table = []
    for frac in ranges:
        rows = np.array([r[2:] for r in results if r[0] == frac])
        vals, final, best = rows.T
        table.append({"range_frac": frac,
                      "range_m": range_from_fraction(scenario, frac),
                      "seeds": len(vals),
                      "blll_mean_bps": float(vals.mean()),
                      "blll_std_bps": float(vals.std()),
                      "blll_final_mean_bps": float(final.mean()),
                      "blll_best_mean_bps": float(best.mean()),
                      "kmeans_greedy_bps": kg,
                      "adapted_greedy_bps": ag})
    return table


SWEEP_FIELDS = ("range_frac", "range_m", "seeds", "blll_mean_bps", "blll_std_bps",
                "blll_final_mean_bps", "blll_best_mean_bps", "kmeans_greedy_bps", "adapted_greedy_bps")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavplace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one algorithm on a scenario")
    run.add_argument("--manifest", help="JSON run manifest (overrides other flags)")
    run.add_argument("--scenario")
    run.add_argument("--algo", choices=ALGORITHMS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--iters", type=int, help="BLLL iterations")
    run.add_argument("--t0", type=float, help="BLLL initial temperature (bit/s)")
    run.add_argument("--cooling", choices=blll.COOLING)
    run.add_argument("--activation", choices=blll.ACTIVATION)
    run.add_argument("--assoc-proposal", choices=blll.ASSOC_PROPOSALS)
    run.add_argument("--range-frac", type=float, help="BLLL neighbourhood range fraction")
    run.add_argument("--configs", help="JSON configuration set for --algo greedy")
    run.add_argument("--out", default="out")

    sw = sub.add_parser("sweep", help="BLLL neighbourhood-range sweep")
    sw.add_argument("--scenario", required=True)
    sw.add_argument("--ranges", type=_floats, default=[0.0, 0.1, 0.25, 0.5, 1.0])
    sw.add_argument("--seeds", type=_ints, default=list(range(10)))
    sw.add_argument("--iters", type=int, default=20_000)
    sw.add_argument("--t0", type=float)
    sw.add_argument("--assoc-proposal", choices=blll.ASSOC_PROPOSALS, default="uniform")
    sw.add_argument("--out", default="out")

    sc = sub.add_parser("scenario", help="write a preset scenario as JSON")
    sc.add_argument("preset", choices=sorted(scenarios.PRESETS))
    sc.add_argument("--seed", type=int)
    sc.add_argument("--out", required=True)
    return parser


def _manifest_from_args(args) -> RunManifest:
    if args.manifest:
        return RunManifest.load(args.manifest)
    if not args.scenario or not args.algo:
        raise InstanceError("--scenario and --algo are required without --manifest")
    block = {}
    if args.algo == "blll":
        for key, val in (("max_iters", args.iters), ("t0", args.t0),
                         ("cooling", args.cooling), ("activation", args.activation),
                         ("assoc_proposal", args.assoc_proposal),
                         ("range_frac", args.range_frac)):
            if val is not None:
                block[key] = val
    return RunManifest(args.scenario, args.algo, args.out, args.seed, blll=block,
                       configs=args.configs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return run_manifest(_manifest_from_args(args))
        if args.command == "sweep":
            scenario = scenarios.load(args.scenario)
            table = sweep_neighborhood_range(scenario, args.ranges, args.seeds, args.iters,
                                             args.t0, args.assoc_proposal)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "sweep.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, SWEEP_FIELDS, lineterminator="\n")
                writer.writeheader()
                writer.writerows(table)
            _dump_json(out / "meta.json", {
                "version": __version__, "scenario_path": args.scenario,
                "ranges": args.ranges, "seeds": args.seeds, "iters": args.iters,
                "t0": args.t0, "assoc_proposal": args.assoc_proposal})
            return EXIT_OK
        preset = scenarios.PRESETS[args.preset]
        scen = preset(args.seed) if args.seed is not None else preset()
        scenarios.dump(scen, args.out)
        return EXIT_OK
    except InfeasibleScenarioError as exc:
        log.error("infeasible scenario: %s", exc)
        return EXIT_INFEASIBLE
    except (InstanceError, json.JSONDecodeError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
