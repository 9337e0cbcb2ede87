"""Scenario presets and JSON (de)serialisation.

JSON layout::

    {
      "users": [{"x": 10.0, "y": 20.0}, ...],
      "uavs": [{"power_dbm": 10, "quota": 4, "bandwidth_hz": 1e6}, ...],
      "grid": {"x_min": 0, "x_max": 1000, "dx": 10, ...},
      "channel": {"epsilon": 9.61, "beta": 0.16, "alpha": 2,
                  "zeta_los_db": 1, "zeta_nlos_db": 20, "carrier_hz": 2e9,
                  "light_speed": 3e8, "noise_dbm": -104,
                  "los_formula": "standard"},
      "eta_min_db": -3,
      "eta_min_mode": "spectral_efficiency",
      "allow_collocation": false,
      "rng_seed": 7
    }

``users`` may instead be ``{"random": {"count": 45, "seed": 1}}`` to scatter
users uniformly over the grid's ground footprint.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import ChannelParams, Grid3D, InstanceError, Scenario, Uav, User

GRID_KEYS = ("x_min", "x_max", "dx", "y_min", "y_max", "dy", "h_min", "h_max", "dh")


class ScenarioFormatError(InstanceError):
    """Malformed scenario document; ``line`` points into the source text."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


def random_users(count: int, grid: Grid3D, seed: int) -> list[User]:
    rng = np.random.default_rng(seed)
    xs = rng.uniform(grid.x_min, grid.x_max, count)
    ys = rng.uniform(grid.y_min, grid.y_max, count)
    return [User(i, float(x), float(y)) for i, (x, y) in enumerate(zip(xs, ys))]


def table2(seed: int = 2024, **overrides) -> Scenario:
    """45 users, 5 UAVs over 1000 m x 1000 m, 10 m grid, heights 100-200 m."""
    grid = Grid3D(0, 1000, 10, 0, 1000, 10, 100, 200, 10)
    users = random_users(overrides.pop("n_users", 45), grid, seed)
    uavs = [Uav(j, power_dbm=10.0, quota=4, bandwidth_hz=1e6)
            for j in range(overrides.pop("n_uavs", 5))]
    return Scenario(users, uavs, grid, ChannelParams(), eta_min_db=-3.0,
                    rng_seed=seed, **overrides)


def desk(seed: int = 0, n_users: int = 4, n_uavs: int = 2, quota: int = 2,
         **overrides) -> Scenario:
    """Oracle-tractable instance: 2x2x2 grid over a 200 m square."""
    grid = Grid3D(50, 150, 100, 50, 150, 100, 100, 200, 100)
    rng = np.random.default_rng(seed)
    users = [User(i, float(x), float(y))
             for i, (x, y) in enumerate(rng.uniform(0, 200, (n_users, 2)))]
    uavs = [Uav(j, power_dbm=10.0, quota=quota) for j in range(n_uavs)]
    return Scenario(users, uavs, grid, ChannelParams(), eta_min_db=-3.0,
                    rng_seed=seed, **overrides)


def range_instance(seed: int = 11) -> Scenario:
    """10 UAVs and 60 users over 1000 m x 1000 m on a 50 m grid, 3 heights."""
    grid = Grid3D(0, 1000, 50, 0, 1000, 50, 100, 200, 50)
    users = random_users(60, grid, seed)
    uavs = [Uav(j, power_dbm=10.0, quota=4) for j in range(10)]
    return Scenario(users, uavs, grid, ChannelParams(), eta_min_db=-3.0, rng_seed=seed)


PRESETS = {"table2": table2, "desk": desk, "range": range_instance}


def to_dict(scenario: Scenario) -> dict:
    return {
        "users": [{"x": u.x, "y": u.y} for u in scenario.users],
        "uavs": [
            {"power_dbm": v.power_dbm, "quota": v.quota, "bandwidth_hz": v.bandwidth_hz}
            for v in scenario.uavs
        ],
        "grid": {k: getattr(scenario.grid, k) for k in GRID_KEYS},
        "channel": asdict(scenario.channel),
        "eta_min_db": scenario.eta_min_db,
        "eta_min_mode": scenario.eta_min_mode,
        "allow_collocation": scenario.allow_collocation,
        "rng_seed": scenario.rng_seed,
    }


def _key_line(text: str | None, key: str) -> int | None:
    if text is None:
        return None
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def from_dict(data: dict, text: str | None = None) -> Scenario:
    """Build a Scenario; errors carry the line of the offending key when known."""
    if not isinstance(data, dict):
        raise ScenarioFormatError("scenario document must be a JSON object", 1)

    def fail(key: str, message: str):
        raise ScenarioFormatError(f"{key}: {message}", _key_line(text, key))

    for key in ("users", "uavs", "grid"):
        if key not in data:
            raise ScenarioFormatError(f"missing required key '{key}'", 1)
    try:
        grid_cfg = data["grid"]
        missing = [k for k in GRID_KEYS if k not in grid_cfg]
        if missing:
            fail("grid", f"missing {', '.join(missing)}")
        grid = Grid3D(*(float(grid_cfg[k]) for k in GRID_KEYS))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioFormatError):
            raise
        fail("grid", str(exc))

    users_cfg = data["users"]
    try:
        if isinstance(users_cfg, dict) and "random" in users_cfg:
            rand = users_cfg["random"]
            users = random_users(int(rand["count"]), grid, int(rand["seed"]))
        else:
            users = [User(i, float(u["x"]), float(u["y"])) for i, u in enumerate(users_cfg)]
    except (KeyError, TypeError, ValueError) as exc:
        fail("users", f"bad user entry ({exc!r})")
    # users may sit outside the grid footprint; only non-finite positions are rejected
    for u in users:
        if not (np.isfinite(u.x) and np.isfinite(u.y)):
            fail("users", f"user {u.id} has non-finite coordinates")

    try:
        uavs = [
            Uav(j, float(v.get("power_dbm", 10.0)), int(v.get("quota", 4)),
                float(v.get("bandwidth_hz", 1e6)))
            for j, v in enumerate(data["uavs"])
        ]
    except (AttributeError, TypeError, ValueError) as exc:
        fail("uavs", str(exc))

    try:
        params = ChannelParams(**data.get("channel", {}))
    except TypeError as exc:
        fail("channel", f"unknown field ({exc})")
    except ValueError as exc:
        fail("channel", str(exc))

    try:
        return Scenario(
            users,
            uavs,
            grid,
            params,
            eta_min_db=float(data.get("eta_min_db", -3.0)),
            eta_min_mode=data.get("eta_min_mode", "spectral_efficiency"),
            allow_collocation=bool(data.get("allow_collocation", False)),
            rng_seed=int(data.get("rng_seed", 0)),
        )
    except InstanceError as exc:
        if type(exc) is InstanceError:
            raise ScenarioFormatError(str(exc)) from exc
        raise


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                                  exc.lineno) from exc
    return from_dict(data, text)


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def dump(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_dict(scenario), indent=2) + "\n")
