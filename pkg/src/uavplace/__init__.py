"""Joint UAV 3D placement and user association for downlink sum-rate."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Association,
    ChannelParams,
    ConstraintViolation,
    Grid3D,
    InstanceError,
    Placement,
    Scenario,
    Uav,
    User,
    enumerate_grid,
    feasible,
)
