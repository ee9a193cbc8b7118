"""Core domain types shared by the planner, the analytics, and the simulator.

All types are plain dataclasses.  Display geometry lives on an integer cell
mesh addressed by (length, height, depth); colors are RGBA with an 8-bit
alpha or, alternatively, a float alpha in [0, 1].  Everything except
:class:`FlsAgent` is immutable and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class CloudValidationError(ValueError):
    """A point cloud violates a structural invariant."""


class DuplicatePointError(CloudValidationError):
    """Two points occupy the same display cell."""

    def __init__(self, coord, first_index, second_index):
        self.coord = coord
        self.first_index = first_index
        self.second_index = second_index
        super().__init__(
            f"duplicate display cell {coord}: points {first_index} and {second_index}"
        )


class FieldRangeError(CloudValidationError):
    """A point field is outside its declared range."""

    def __init__(self, field_name, value, message):
        self.field_name = field_name
        self.value = value
        super().__init__(message)


def _check_channel(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FieldRangeError(name, value, f"color channel {name}={value!r} must be an int")
    if not 0 <= value <= 255:
        raise FieldRangeError(name, value, f"color channel {name}={value} outside [0, 255]")


@dataclass(frozen=True)
class DisplayPoint:
    """One illuminated cell: integer (l, h, d) coordinates plus RGBA color.

    The alpha channel is either an int in [0, 255] or a float in [0, 1];
    it is carried through unchanged and never interpreted by the planner
    or the simulator.
    """

    l: int
    h: int
    d: int
    r: int = 255
    g: int = 255
    b: int = 255
    a: int | float = 255

    def __post_init__(self):
        for name in ("l", "h", "d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise FieldRangeError(name, value, f"coordinate {name}={value!r} must be an int")
            if value < 0:
                raise FieldRangeError(name, value, f"coordinate {name}={value} must be non-negative")
        for name in ("r", "g", "b"):
            _check_channel(name, getattr(self, name))
        if isinstance(self.a, bool):
            raise FieldRangeError("a", self.a, "alpha must be an int or float")
        if isinstance(self.a, int):
            if not 0 <= self.a <= 255:
                raise FieldRangeError("a", self.a, f"alpha {self.a} outside [0, 255]")
        elif isinstance(self.a, float):
            if not 0.0 <= self.a <= 1.0:
                raise FieldRangeError("a", self.a, f"normalized alpha {self.a} outside [0, 1]")
        else:
            raise FieldRangeError("a", self.a, f"alpha {self.a!r} must be an int or float")

    @property
    def coord(self) -> tuple[int, int, int]:
        return (self.l, self.h, self.d)


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of display points; one point needs one illuminating FLS."""

    points: tuple[DisplayPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def fls_count(self) -> int:
        """Number of FLSs required to light the cloud (one per point)."""
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def validate_cloud(cloud: PointCloud) -> PointCloud:
    """Check all cloud invariants and return the cloud unchanged.

    Point-level ranges are enforced at construction; this adds the
    cloud-level check that no two points share a display cell.  Validating
    an already valid cloud is a no-op, so the call is idempotent.
    """
    seen: dict[tuple[int, int, int], int] = {}
    for index, point in enumerate(cloud.points):
        prior = seen.get(point.coord)
        if prior is not None:
            raise DuplicatePointError(point.coord, prior, index)
        seen[point.coord] = index
    return cloud


@dataclass(frozen=True)
class BatteryParams:
    """Battery characteristics: full-charge flight time and full recharge time."""

    beta_s: float
    omega_s: float

    def __post_init__(self):
        if not self.beta_s > 0:
            raise ValueError(f"flight time beta_s={self.beta_s} must be > 0")
        if self.omega_s < 0:
            raise ValueError(f"charge time omega_s={self.omega_s} must be >= 0")

    @property
    def beta_ms(self) -> int:
        return round(self.beta_s * 1000)

    @property
    def omega_ms(self) -> int:
        return round(self.omega_s * 1000)


@dataclass(frozen=True)
class ReliabilityParams:
    """Failure-model inputs: per-FLS MTTF, group repair time, and group size."""

    mttf_hours: float
    mttr_s: float
    group_size: int

    def __post_init__(self):
        if not self.mttf_hours > 0:
            raise ValueError(f"mttf_hours={self.mttf_hours} must be > 0")
        if not self.mttr_s > 0:
            raise ValueError(f"mttr_s={self.mttr_s} must be > 0")
        if self.group_size < 1:
            raise ValueError(f"group_size={self.group_size} must be >= 1")

    @property
    def mttf_ms(self) -> float:
        return self.mttf_hours * 3_600_000.0

    @property
    def mttr_hours(self) -> float:
        return self.mttr_s / 3600.0


class Role(enum.Enum):
    """What a simulated FLS is currently doing."""

    ILLUMINATING = "illuminating"
    STANDBY = "standby"
    CHARGING = "charging"
    IN_TRANSIT_TO_CHARGER = "in_transit_to_charger"
    IN_TRANSIT_TO_DISPLAY = "in_transit_to_display"
    HANGAR = "hangar"
    FAILED = "failed"
    FIRST_DEPLOYMENT = "first_deployment"


@dataclass
class FlsAgent:
    """Mutable state of one simulated FLS.

    ``flock_id``/``stag_id`` identify the staggered-charging slot the agent
    currently serves, if any; the pair must be unique across the swarm
    while set.  ``remaining_flight_ms`` is maintained lazily by the
    simulator and is only meaningful together with a reference time.
    """

    id: int
    role: Role = Role.FIRST_DEPLOYMENT
    flock_id: int | None = None
    stag_id: int | None = None
    remaining_flight_ms: int = 0
    assigned_point: DisplayPoint | None = None
    group_id: int | None = None
