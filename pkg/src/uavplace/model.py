"""Problem-instance types: channel constants, users, UAVs, the 3D search grid,
placements, associations, and the feasibility predicate over all of them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InstanceError(ValueError):
    """Malformed problem data (bad dimensions, out-of-range parameters)."""


class InfeasibleScenarioError(InstanceError):
    """Well-formed scenario that admits no valid placement."""


class ConstraintViolation(ValueError):
    """An association/placement breaks one of the problem constraints.

    ``constraint`` is one of ``"quota"``, ``"qos"``, ``"single_association"``,
    ``"grid"``, ``"collocation"``.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


LOS_FORMULAS = ("standard", "as_printed")
ETA_MIN_MODES = ("spectral_efficiency", "sinr")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    epsilon: float = 9.61
    beta: float = 0.16
    alpha: float = 2.0
    zeta_los_db: float = 1.0
    zeta_nlos_db: float = 20.0
    carrier_hz: float = 2e9
    light_speed: float = 3e8
    noise_dbm: float = -104.0
    los_formula: str = "standard"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InstanceError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.beta > 0:
            raise InstanceError(f"beta must be > 0, got {self.beta}")
        if not self.alpha >= 2:
            raise InstanceError(f"alpha must be >= 2, got {self.alpha}")
        if self.zeta_nlos_db < self.zeta_los_db:
            raise InstanceError("zeta_nlos_db must be >= zeta_los_db")
        if not self.carrier_hz > 0 or not self.light_speed > 0:
            raise InstanceError("carrier_hz and light_speed must be > 0")
        if self.los_formula not in LOS_FORMULAS:
            raise InstanceError(f"los_formula must be one of {LOS_FORMULAS}")

    @property
    def noise_w(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def zeta_los(self) -> float:
        return db_to_linear(self.zeta_los_db)

    @property
    def zeta_nlos(self) -> float:
        return db_to_linear(self.zeta_nlos_db)


@dataclass(frozen=True)
class User:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Uav:
    id: int
    power_dbm: float = 10.0
    quota: int = 4
    bandwidth_hz: float = 1e6

    def __post_init__(self):
        if self.quota < 0:
            raise InstanceError(f"UAV {self.id}: quota must be >= 0")
        if not self.bandwidth_hz > 0:
            raise InstanceError(f"UAV {self.id}: bandwidth_hz must be > 0")

    @property
    def power_w(self) -> float:
        return dbm_to_watt(self.power_dbm)


def _axis(lo: float, hi: float, step: float, name: str) -> np.ndarray:
    if hi < lo:
        raise InstanceError(f"grid axis {name}: max < min")
    if not step > 0:
        raise InstanceError(f"grid axis {name}: step must be > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    values = lo + step * np.arange(n, dtype=float)
    # guard against float drift past the upper bound
    return np.minimum(values, hi)


@dataclass(frozen=True)
class Grid3D:
    """Regular grid of candidate UAV positions.

    Points are indexed row-major with x slowest and h fastest:
    ``index = (ix * ny + iy) * nh + ih``.
    """

    x_min: float
    x_max: float
    dx: float
    y_min: float
    y_max: float
    dy: float
    h_min: float
    h_max: float
    dh: float
    xs: np.ndarray = field(init=False, repr=False, compare=False)
    ys: np.ndarray = field(init=False, repr=False, compare=False)
    hs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, lo, hi, step in (
            ("x", self.x_min, self.x_max, self.dx),
            ("y", self.y_min, self.y_max, self.dy),
            ("h", self.h_min, self.h_max, self.dh),
        ):
            arr = _axis(lo, hi, step, name)
            arr.setflags(write=False)
            object.__setattr__(self, name + "s", arr)
        if self.h_min <= 0:
            raise InstanceError("grid axis h: UAV heights must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.xs), len(self.ys), len(self.hs)

    @property
    def size(self) -> int:
        nx, ny, nh = self.shape
        return nx * ny * nh

    def unravel(self, index: int) -> tuple[int, int, int]:
        nx, ny, nh = self.shape
        if not 0 <= index < nx * ny * nh:
            raise IndexError(f"grid index {index} out of range")
        ixy, ih = divmod(index, nh)
        ix, iy = divmod(ixy, ny)
        return ix, iy, ih

    def ravel(self, ix: int, iy: int, ih: int) -> int:
        _, ny, nh = self.shape
        return (ix * ny + iy) * nh + ih

    def point(self, index: int) -> tuple[float, float, float]:
        ix, iy, ih = self.unravel(index)
        return float(self.xs[ix]), float(self.ys[iy]), float(self.hs[ih])

    def points(self) -> np.ndarray:
        """All grid points as an ``(L, 3)`` array in index order."""
        gx, gy, gh = np.meshgrid(self.xs, self.ys, self.hs, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gh.ravel()], axis=1)

    def locate(self, point: Sequence[float], tol: float = 1e-6) -> int | None:
        """Grid index of ``point`` or None when it is not a grid point."""
        idx = []
        for axis, v in zip((self.xs, self.ys, self.hs), point):
            k = int(np.argmin(np.abs(axis - v)))
            if abs(axis[k] - v) > tol:
                return None
            idx.append(k)
        return self.ravel(*idx)

    def neighbors(self, index: int) -> list[int]:
        """In-bounds axis neighbours in the order x-, x+, y-, y+, h-, h+."""
        ix, iy, ih = self.unravel(index)
        nx, ny, nh = self.shape
        out = []
        for axis, (c, n) in enumerate(((ix, nx), (iy, ny), (ih, nh))):
            for step in (-1, 1):
                k = c + step
                if 0 <= k < n:
                    coords = [ix, iy, ih]
                    coords[axis] = k
                    out.append(self.ravel(*coords))
        return out

    def snap_xy(self, x: float, y: float) -> tuple[float, float]:
        ix = int(np.argmin(np.abs(self.xs - x)))
        iy = int(np.argmin(np.abs(self.ys - y)))
        return float(self.xs[ix]), float(self.ys[iy])

    @property
    def diagonal(self) -> float:
        return math.sqrt(
            (self.x_max - self.x_min) ** 2
            + (self.y_max - self.y_min) ** 2
            + (self.h_max - self.h_min) ** 2
        )


def enumerate_grid(grid: Grid3D) -> list[tuple[float, float, float]]:
    return [tuple(p) for p in grid.points().tolist()]


@dataclass(frozen=True)
class Placement:
    """3D position of every UAV, one ``(x, y, h)`` triple per UAV."""

    positions: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        pos = tuple(tuple(float(c) for c in p) for p in self.positions)
        if any(len(p) != 3 for p in pos):
            raise InstanceError("each position must be an (x, y, h) triple")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_indices(cls, grid: Grid3D, indices: Iterable[int]) -> "Placement":
        return cls(tuple(grid.point(int(i)) for i in indices))

    @classmethod
    def from_array(cls, arr) -> "Placement":
        return cls(tuple(tuple(row) for row in np.asarray(arr, dtype=float).tolist()))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.positions, dtype=float).reshape(-1, 3)

    def grid_indices(self, grid: Grid3D) -> list[int | None]:
        return [grid.locate(p) for p in self.positions]

    def moved(self, j: int, position: Sequence[float]) -> "Placement":
        pos = list(self.positions)
        pos[j] = tuple(position)
        return Placement(tuple(pos))


class Association:
    """Binary user-by-UAV matrix ``q``; stored read-only."""

    __slots__ = ("q",)

    def __init__(self, q):
        arr = np.array(q, dtype=np.int8)
        if arr.ndim != 2:
            raise InstanceError("association matrix must be 2-D")
        if not np.isin(arr, (0, 1)).all():
            raise InstanceError("association entries must be 0 or 1")
        arr.setflags(write=False)
        self.q = arr

    @classmethod
    def empty(cls, n_users: int, n_uavs: int) -> "Association":
        return cls(np.zeros((n_users, n_uavs), dtype=np.int8))

    @classmethod
    def from_serving(cls, serving: Sequence[int], n_uavs: int) -> "Association":
        """Build from a per-user serving-UAV vector where -1 means unassigned."""
        serving = np.asarray(serving, dtype=int)
        q = np.zeros((len(serving), n_uavs), dtype=np.int8)
        rows = np.nonzero(serving >= 0)[0]
        q[rows, serving[rows]] = 1
        return cls(q)

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape

    def serving(self) -> np.ndarray:
        """Per-user serving UAV (-1 if none). Only valid when row sums <= 1."""
        out = np.full(self.q.shape[0], -1, dtype=int)
        rows, cols = np.nonzero(self.q)
        out[rows] = cols
        return out

    def pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.q)
        return list(zip(rows.tolist(), cols.tolist()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Association) and np.array_equal(self.q, other.q)

    def __hash__(self) -> int:
        return hash(self.q.tobytes())

    def __repr__(self) -> str:
        return f"Association(pairs={self.pairs()})"


@dataclass(frozen=True)
class Scenario:
    users: tuple[User, ...]
    uavs: tuple[Uav, ...]
    grid: Grid3D
    channel: ChannelParams = ChannelParams()
    eta_min_db: float = -3.0
    eta_min_mode: str = "spectral_efficiency"
    allow_collocation: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "uavs", tuple(self.uavs))
        if not self.users or not self.uavs:
            raise InfeasibleScenarioError("need at least one user and one UAV")
        if [u.id for u in self.users] != list(range(len(self.users))):
            raise InstanceError("user ids must be 0..I-1 in order")
        if [u.id for u in self.uavs] != list(range(len(self.uavs))):
            raise InstanceError("UAV ids must be 0..J-1 in order")
        if self.eta_min_mode not in ETA_MIN_MODES:
            raise InstanceError(f"eta_min_mode must be one of {ETA_MIN_MODES}")
        if not self.allow_collocation and self.grid.size < len(self.uavs):
            raise InfeasibleScenarioError(
                f"{len(self.uavs)} UAVs cannot occupy distinct points of a "
                f"{self.grid.size}-point grid"
            )
        if not 0 <= self.rng_seed < 2**64:
            raise InstanceError("rng_seed must be a 64-bit unsigned integer")
        arrays = {
            "users_xy": np.array([(u.x, u.y) for u in self.users], dtype=float),
            "powers_w": np.array([v.power_w for v in self.uavs], dtype=float),
            "quotas": np.array([v.quota for v in self.uavs], dtype=int),
            "bandwidths": np.array([v.bandwidth_hz for v in self.uavs], dtype=float),
        }
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    @property
    def eta_min(self) -> float:
        """Spectral-efficiency floor in bit/s/Hz applied to every associated link."""
        lin = db_to_linear(self.eta_min_db)
        if self.eta_min_mode == "sinr":
            return math.log2(1.0 + lin)
        return lin

    def with_(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


def _check_shape(assoc: Association, scenario: Scenario) -> None:
    if assoc.shape != (scenario.n_users, scenario.n_uavs):
        raise InstanceError(
            f"association shape {assoc.shape} != "
            f"({scenario.n_users}, {scenario.n_uavs})"
        )


def violations(assoc: Association, placement: Placement, scenario: Scenario) -> list[str]:
    """Names of all violated constraints (empty list means feasible)."""
    from . import channel

    _check_shape(assoc, scenario)
    if len(placement) != scenario.n_uavs:
        raise InstanceError(
            f"placement has {len(placement)} positions for {scenario.n_uavs} UAVs"
        )
    found = []
    q = assoc.q
    if (q.sum(axis=1) > 1).any():
        found.append("single_association")
    if (q.sum(axis=0) > scenario.quotas).any():
        found.append("quota")
    indices = placement.grid_indices(scenario.grid)
    if any(i is None for i in indices):
        found.append("grid")
    elif not scenario.allow_collocation and len(set(indices)) != len(indices):
        found.append("collocation")
    if q.any():
        eta = channel.spectral_efficiency_matrix(placement.array, scenario)
        if (eta[q == 1] < scenario.eta_min).any():
            found.append("qos")
    return found


def feasible(assoc: Association, placement: Placement, scenario: Scenario) -> bool:
    return not violations(assoc, placement, scenario)
