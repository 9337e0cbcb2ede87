import numpy as np
import pytest

from uavplace.model import ChannelParams, Grid3D, Scenario, Uav, User


def make_scenario(users_xy, n_uavs=2, quota=2, grid=None, power_dbm=10.0, **kw):
    grid = grid or Grid3D(50, 150, 100, 50, 150, 100, 100, 200, 100)
    users = [User(i, float(x), float(y)) for i, (x, y) in enumerate(users_xy)]
    if isinstance(quota, int):
        quota = [quota] * n_uavs
    if isinstance(power_dbm, (int, float)):
        power_dbm = [power_dbm] * n_uavs
    uavs = [Uav(j, power_dbm=p, quota=q) for j, (p, q) in enumerate(zip(power_dbm, quota))]
    return Scenario(users, uavs, grid, kw.pop("channel", ChannelParams()), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store and print one acceptance verdict line."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
