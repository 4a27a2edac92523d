"""Floor-to-screen geometry for a rectangular 360-degree display wall.

The walkable floor is a ``width_m x depth_m`` rectangle whose four walls
carry one continuous screen strip. A screen location is addressed either
by arc length ``s`` in ``[0, perimeter)`` measured along the walls from
the ``(0, 0)`` corner, or by an integer pixel column on the unrolled
``px_w``-wide strip. Traversal order is front (y=0, x increasing), right
(x=width, y increasing), back (y=depth, x decreasing), left (x=0,
y decreasing).

Everything here is a pure function of its inputs; there is no shared
mutable state apart from the optional :class:`ZoneTracker`, which callers
own one-per-user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple


class Wall(Enum):
    FRONT = "front"  # y = 0, traversed x: 0 -> width
    RIGHT = "right"  # x = width, traversed y: 0 -> depth
    BACK = "back"    # y = depth, traversed x: width -> 0
    LEFT = "left"    # x = 0, traversed y: depth -> 0


WALL_ORDER = (Wall.FRONT, Wall.RIGHT, Wall.BACK, Wall.LEFT)


class Region(Enum):
    """Interactive role of a wall position.

    The two 10 m walls carry the per-user image columns, the front wall
    carries the personal staging columns plus the shared area, and the
    back wall is decorative only.
    """

    LEFT_SIDE = "left"
    RIGHT_SIDE = "right"
    FRONT_SHARED = "front_shared"
    BACK_INACTIVE = "back_inactive"


@dataclass(frozen=True)
class RoomSpec:
    """Physical room and screen constants plus interaction thresholds."""

    width_m: float = 12.0
    depth_m: float = 10.0
    screen_height_m: float = 5.0
    px_w: int = 14500
    px_h: int = 1200
    active_enter_m: float = 2.0
    active_exit_m: float = 2.2
    columns_per_side: int = 9

    def __post_init__(self) -> None:
        if not (self.width_m > 0 and self.depth_m > 0):
            raise ValueError("room dimensions must be positive")
        if self.px_w < 1 or self.px_h < 1:
            raise ValueError("pixel dimensions must be >= 1")
        if not (0 < self.active_enter_m <= self.active_exit_m):
            raise ValueError("need 0 < active_enter_m <= active_exit_m")
        if self.active_exit_m >= min(self.width_m, self.depth_m) / 2:
            raise ValueError("activation band must not reach the room center")
        if self.columns_per_side < 1:
            raise ValueError("columns_per_side must be >= 1")

    def perimeter_m(self) -> float:
        return 2.0 * (self.width_m + self.depth_m)

    def wall_length(self, wall: Wall) -> float:
        return self.width_m if wall in (Wall.FRONT, Wall.BACK) else self.depth_m

    def wall_start(self, wall: Wall) -> float:
        """Arc length at which ``wall`` begins."""
        s = 0.0
        for w in WALL_ORDER:
            if w is wall:
                return s
            s += self.wall_length(w)
        raise AssertionError(wall)

    def column_width_m(self) -> float:
        return self.depth_m / self.columns_per_side


@dataclass(frozen=True)
class FloorPoint:
    """A tracked position on the walkable floor, meters."""

    x: float
    y: float


@dataclass(frozen=True)
class PerimeterPoint:
    """A point on the screen strip: arc length plus its wall-local form.

    ``wall`` and ``t`` (meters from the wall's start corner) are always
    derived from ``s`` so the two forms cannot disagree.
    """

    s: float
    wall: Wall
    t: float


@dataclass(frozen=True)
class ScreenPixel:
    u: int
    v: int


@dataclass(frozen=True)
class ActivationState:
    """Hysteresis latch for the near-screen interaction band.

    A user becomes active when their clearance drops to ``active_enter_m``
    or less and stays active until it exceeds ``active_exit_m``; the gap
    between the two thresholds absorbs tracking jitter at the boundary.
    """

    active: bool = False
    last_clearance_m: float = math.inf


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite coordinate: {v!r}")


def perimeter_point(s: float, room: RoomSpec) -> PerimeterPoint:
    """Build a :class:`PerimeterPoint` from arc length alone."""
    per = room.perimeter_m()
    _require_finite(s)
    if not 0.0 <= s < per:
        raise ValueError(f"arc length {s} outside [0, {per})")
    acc = 0.0
    for wall in WALL_ORDER:
        length = room.wall_length(wall)
        if s < acc + length or wall is WALL_ORDER[-1]:
            return PerimeterPoint(s=s, wall=wall, t=s - acc)
        acc += length
    raise AssertionError


def perimeter_xy(pp: PerimeterPoint, room: RoomSpec) -> Tuple[float, float]:
    """Floor coordinates of a perimeter point."""
    w, d, t = room.width_m, room.depth_m, pp.t
    if pp.wall is Wall.FRONT:
        return (t, 0.0)
    if pp.wall is Wall.RIGHT:
        return (w, t)
    if pp.wall is Wall.BACK:
        return (w - t, d)
    return (0.0, d - t)


def project_to_perimeter(p: FloorPoint, room: RoomSpec) -> Tuple[PerimeterPoint, float]:
    """Nearest screen point for a floor position, plus the clearance to it.

    For interior points the nearest point is the perpendicular foot on the
    closest wall; a tie between walls resolves to the smaller arc length.
    """
    _require_finite(p.x, p.y)
    w, d = room.width_m, room.depth_m
    if not (0.0 <= p.x <= w and 0.0 <= p.y <= d):
        raise ValueError(f"floor point ({p.x}, {p.y}) outside the room")
    per = room.perimeter_m()
    # (clearance, s) per wall; feet at corners wrap back into [0, per).
    candidates = (
        (p.y, p.x % per),                      # front
        (w - p.x, (w + p.y) % per),            # right
        (d - p.y, (w + d + (w - p.x)) % per),  # back
        (p.x, (2 * w + d + (d - p.y)) % per),  # left
    )
    clearance, s = min(candidates)
    return perimeter_point(s, room), clearance


def arc_to_pixel(s: float, room: RoomSpec) -> int:
    """Map arc length to a pixel column: ``floor(s * px_w / perimeter)``."""
    per = room.perimeter_m()
    _require_finite(s)
    if not 0.0 <= s < per:
        raise ValueError(f"arc length {s} outside [0, {per})")
    return min(int(math.floor(s * room.px_w / per)), room.px_w - 1)


def pixel_to_arc(u: int, room: RoomSpec) -> float:
    """Arc length of a pixel column's bin center; inverts :func:`arc_to_pixel`."""
    if not 0 <= u < room.px_w:
        raise ValueError(f"pixel column {u} outside [0, {room.px_w})")
    return (u + 0.5) * room.perimeter_m() / room.px_w


def update_activation(state: ActivationState, clearance: float, room: RoomSpec) -> ActivationState:
    """Advance the activation latch for a new clearance sample."""
    _require_finite(clearance)
    if clearance < 0:
        raise ValueError("clearance must be >= 0")
    if state.active:
        active = clearance <= room.active_exit_m
    else:
        active = clearance <= room.active_enter_m
    return ActivationState(active=active, last_clearance_m=clearance)


def column_from_t(t: float, wall_length: float, columns: int) -> int:
    col = int(math.floor(t / (wall_length / columns)))
    return min(max(col, 0), columns - 1)


def column_index(pp: PerimeterPoint, room: RoomSpec) -> Tuple[Region, Optional[int]]:
    """Interactive region and, on a side wall, the 0-based column under ``pp``."""
    if pp.wall is Wall.FRONT:
        return Region.FRONT_SHARED, None
    if pp.wall is Wall.BACK:
        return Region.BACK_INACTIVE, None
    region = Region.RIGHT_SIDE if pp.wall is Wall.RIGHT else Region.LEFT_SIDE
    col = column_from_t(pp.t, room.wall_length(pp.wall), room.columns_per_side)
    return region, col


def feedback_anchor(p: FloorPoint, room: RoomSpec) -> ScreenPixel:
    """Bottom-of-screen pixel above which a user's feedback rings render."""
    pp, _ = project_to_perimeter(p, room)
    return ScreenPixel(u=arc_to_pixel(pp.s, room), v=room.px_h - 1)


# --- zone tracking with a dead band -----------------------------------------

@dataclass(frozen=True)
class Zone:
    """A contiguous span of the perimeter with one interactive meaning.

    ``key`` identifies the zone (hashable); ``s_lo``/``s_hi`` bound its arc
    span, half-open, possibly wrapping through 0.
    """

    key: tuple
    s_lo: float
    s_hi: float


def zone_at(s: float, room: RoomSpec) -> Zone:
    """Zone of an arc position: one per side-wall column, one per other wall."""
    pp = perimeter_point(s, room)
    region, col = column_index(pp, room)
    start = room.wall_start(pp.wall)
    if col is None:
        return Zone(key=(region.value, None), s_lo=start, s_hi=start + room.wall_length(pp.wall))
    cw = room.wall_length(pp.wall) / room.columns_per_side
    return Zone(key=(region.value, col), s_lo=start + col * cw, s_hi=start + (col + 1) * cw)


def distance_outside_span(s: float, s_lo: float, s_hi: float, perimeter: float) -> float:
    """Circular distance from ``s`` to the span ``[s_lo, s_hi)``; 0 inside."""
    s = s % perimeter
    lo = s_lo % perimeter
    span = (s_hi - s_lo) % perimeter or perimeter
    rel = (s - lo) % perimeter
    if rel < span:
        return 0.0
    return min(rel - span, perimeter - rel)


class ZoneTracker:
    """Debounced zone follower.

    The raw zone flips the instant a projection crosses a boundary; with
    tracking noise that flickers. The tracker only adopts a new zone once
    the projection sits at least ``dead_band_m`` outside the current
    zone's span.
    """

    def __init__(
        self,
        room: RoomSpec,
        dead_band_m: float = 0.1,
        zone_fn: Optional[Callable[[float], Zone]] = None,
    ) -> None:
        self._room = room
        self._dead_band = dead_band_m
        self._zone_fn = zone_fn or (lambda s: zone_at(s, room))
        self._current: Optional[Zone] = None

    @property
    def current(self) -> Optional[Zone]:
        return self._current

    def reset(self) -> None:
        self._current = None

    def update(self, s: float) -> Tuple[Zone, bool]:
        """Feed one arc sample; returns (zone now held, whether it changed)."""
        raw = self._zone_fn(s)
        if self._current is None:
            self._current = raw
            return raw, True
        if raw.key == self._current.key:
            self._current = raw  # span may have been recomputed
            return raw, False
        past = distance_outside_span(
            s, self._current.s_lo, self._current.s_hi, self._room.perimeter_m()
        )
        if past >= self._dead_band:
            self._current = raw
            return raw, True
        return self._current, False
