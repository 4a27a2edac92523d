"""Identity management: phone/voice sessions, tracked bodies, and binding.

A person entering the room scans one of two QR codes (left or right wall)
which registers a session; the overhead tracker reports anonymous
``(x, y)`` tracks. This module owns the association between the two:
each session greedily claims the nearest unclaimed track standing inside
the activation band of its own wall, keeps it through short tracking
dropouts, and releases it after a grace period.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple
from urllib.parse import parse_qs, urlparse

from .geometry import (
    ActivationState,
    FloorPoint,
    Region,
    RoomSpec,
    ZoneTracker,
    arc_to_pixel,
    column_index,
    project_to_perimeter,
    update_activation,
)


class UnknownSideToken(Exception):
    pass


class SideFull(Exception):
    pass


class UnknownToken(Exception):
    pass


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def region(self) -> Region:
        return Region.LEFT_SIDE if self is Side.LEFT else Region.RIGHT_SIDE


def parse_side_token(token: str) -> Side:
    """Decode a QR side token: ``left``/``right``, ``side=left``, or a pad URL."""
    text = token.strip().lower()
    if "?" in text or text.startswith(("http://", "https://", "/")):
        qs = parse_qs(urlparse(text).query)
        values = qs.get("side", [])
        text = values[0] if values else ""
    elif text.startswith("side="):
        text = text[len("side="):]
    if text == "left":
        return Side.LEFT
    if text == "right":
        return Side.RIGHT
    raise UnknownSideToken(f"cannot decode side from {token!r}")


@dataclass
class Track:
    track_id: str
    pos: FloorPoint
    updated_at: int
    claimed_by: Optional[str] = None


@dataclass(frozen=True)
class TrackSnapshot:
    entries: Tuple[Tuple[str, FloorPoint], ...]
    captured_at: int


@dataclass
class Session:
    session_id: str
    side: Side
    resume_token: str
    bound_track: Optional[str] = None
    phone_seq: int = 0
    voice_seq: int = 0
    activation: ActivationState = field(default_factory=ActivationState)
    connected: bool = True
    disconnected_at: Optional[int] = None
    epoch: int = 1
    # derived spatial state, refreshed on every ingest while bound
    zone_key: Optional[tuple] = None
    anchor_u: Optional[int] = None
    clearance: Optional[float] = None
    tracker: Optional[ZoneTracker] = None


@dataclass(frozen=True)
class SessionUpdate:
    """One session's spatial state after an ingest cycle, with change flags."""

    session_id: str
    active: bool
    zone: Optional[tuple]
    anchor_u: Optional[int]
    clearance: Optional[float]
    bound_track: Optional[str]
    activation_changed: bool = False
    zone_changed: bool = False
    anchor_changed: bool = False
    binding_changed: bool = False

    @property
    def any_change(self) -> bool:
        return (
            self.activation_changed
            or self.zone_changed
            or self.anchor_changed
            or self.binding_changed
        )


@dataclass(frozen=True)
class RingState:
    track_id: str
    u: int
    active: bool
    session_id: Optional[str]


@dataclass(frozen=True)
class RegistryConfig:
    max_sessions_per_side: int = 1
    max_tracks: int = 6
    grace_ms: int = 3000
    session_ttl_ms: int = 600_000
    dead_band_m: float = 0.1


def _default_id_factory() -> Tuple[str, str]:
    return secrets.token_urlsafe(8), secrets.token_urlsafe(16)


class SessionRegistry:
    """Single-writer store of sessions and tracks.

    All mutation happens on the hub's event loop; timestamps are passed in
    (simulated or wall-clock milliseconds) so behavior is identical under
    test and in production.
    """

    def __init__(
        self,
        room: RoomSpec,
        config: RegistryConfig = RegistryConfig(),
        id_factory: Callable[[], Tuple[str, str]] = _default_id_factory,
    ) -> None:
        self.room = room
        self.config = config
        self._id_factory = id_factory
        self.sessions: Dict[str, Session] = {}
        self.tracks: Dict[str, Track] = {}
        self.skipped_entries = 0

    # --- registration and resumption ---------------------------------------

    def register_session(self, side_token: str, now: int) -> Session:
        side = parse_side_token(side_token)
        self._expire_sessions(now)
        occupied = sum(1 for s in self.sessions.values() if s.side is side)
        if occupied >= self.config.max_sessions_per_side:
            raise SideFull(f"side {side.value} already has {occupied} session(s)")
        sid, resume = self._id_factory()
        session = Session(
            session_id=sid,
            side=side,
            resume_token=resume,
            tracker=ZoneTracker(self.room, self.config.dead_band_m),
        )
        self.sessions[sid] = session
        return session

    def register_fixed(
        self, side: Side | str, session_id: str, resume_token: str, now: int
    ) -> Session:
        """Registration with caller-supplied identity; used by log replay."""
        side = side if isinstance(side, Side) else Side(side)
        self._expire_sessions(now)
        occupied = sum(1 for s in self.sessions.values() if s.side is side)
        if occupied >= self.config.max_sessions_per_side:
            raise SideFull(f"side {side.value} already has {occupied} session(s)")
        session = Session(
            session_id=session_id,
            side=side,
            resume_token=resume_token,
            tracker=ZoneTracker(self.room, self.config.dead_band_m),
        )
        self.sessions[session_id] = session
        return session

    def resume_session(self, resume_token: str, now: int) -> Session:
        self._expire_sessions(now)
        for session in self.sessions.values():
            if session.resume_token == resume_token:
                session.connected = True
                session.disconnected_at = None
                session.epoch += 1
                return session
        raise UnknownToken("no live session for that resume token")

    def mark_disconnected(self, session_id: str, now: int) -> None:
        session = self.sessions.get(session_id)
        if session and session.connected:
            session.connected = False
            session.disconnected_at = now

    def _expire_sessions(self, now: int) -> None:
        dead = [
            sid
            for sid, s in self.sessions.items()
            if not s.connected
            and s.disconnected_at is not None
            and now - s.disconnected_at > self.config.session_ttl_ms
        ]
        for sid in dead:
            self._unbind(self.sessions[sid])
            del self.sessions[sid]

    # --- tracking ingest ----------------------------------------------------

    def ingest_snapshot(self, snap: TrackSnapshot) -> List[SessionUpdate]:
        """Apply one tracker frame; returns per-session change summaries."""
        now = snap.captured_at
        accepted = 0
        for track_id, pos in snap.entries:
            if accepted >= self.config.max_tracks:
                self.skipped_entries += 1
                continue
            if not (math.isfinite(pos.x) and math.isfinite(pos.y)):
                self.skipped_entries += 1
                continue
            clamped = FloorPoint(
                x=min(max(pos.x, 0.0), self.room.width_m),
                y=min(max(pos.y, 0.0), self.room.depth_m),
            )
            track = self.tracks.get(track_id)
            if track is None:
                self.tracks[track_id] = Track(track_id, clamped, updated_at=now)
            else:
                track.pos = clamped
                track.updated_at = max(track.updated_at, now)
            accepted += 1

        updates = self._drop_stale_tracks(now)
        for session in self.sessions.values():
            if session.bound_track is not None:
                updates.append(self._refresh(session))
        return [u for u in updates if u.any_change]

    def _drop_stale_tracks(self, now: int) -> List[SessionUpdate]:
        updates = []
        stale = [
            t.track_id
            for t in self.tracks.values()
            if now - t.updated_at > self.config.grace_ms
        ]
        for track_id in stale:
            track = self.tracks.pop(track_id)
            if track.claimed_by:
                session = self.sessions.get(track.claimed_by)
                if session:
                    self._unbind(session)
                    updates.append(
                        SessionUpdate(
                            session_id=session.session_id,
                            active=False,
                            zone=None,
                            anchor_u=None,
                            clearance=None,
                            bound_track=None,
                            activation_changed=True,
                            zone_changed=True,
                            anchor_changed=True,
                            binding_changed=True,
                        )
                    )
        return updates

    def _unbind(self, session: Session) -> None:
        if session.bound_track and session.bound_track in self.tracks:
            self.tracks[session.bound_track].claimed_by = None
        session.bound_track = None
        session.activation = ActivationState(active=False, last_clearance_m=math.inf)
        session.zone_key = None
        session.anchor_u = None
        session.clearance = None
        if session.tracker:
            session.tracker.reset()

    def _refresh(self, session: Session) -> SessionUpdate:
        track = self.tracks[session.bound_track]
        pp, clearance = project_to_perimeter(track.pos, self.room)
        prev_active = session.activation.active
        session.activation = update_activation(session.activation, clearance, self.room)
        zone, _ = session.tracker.update(pp.s)
        anchor = arc_to_pixel(pp.s, self.room)
        update = SessionUpdate(
            session_id=session.session_id,
            active=session.activation.active,
            zone=zone.key,
            anchor_u=anchor,
            clearance=clearance,
            bound_track=session.bound_track,
            activation_changed=session.activation.active != prev_active,
            zone_changed=zone.key != session.zone_key,
            anchor_changed=anchor != session.anchor_u,
        )
        session.zone_key = zone.key
        session.anchor_u = anchor
        session.clearance = clearance
        return update

    # --- binding ------------------------------------------------------------

    def bind_sessions(self) -> List[Tuple[str, str]]:
        """Greedily bind unbound sessions to eligible tracks; returns new pairs.

        Eligible: unclaimed track projecting onto the session's side wall
        with clearance within the activation-enter threshold. Ascending
        clearance wins; exact ties go to the smaller track id.
        """
        candidates = []
        for session in self.sessions.values():
            if session.bound_track is not None:
                continue
            for track in self.tracks.values():
                if track.claimed_by is not None:
                    continue
                pp, clearance = project_to_perimeter(track.pos, self.room)
                if clearance > self.room.active_enter_m:
                    continue
                track_region, _ = column_index(pp, self.room)
                if track_region is not session.side.region:
                    continue
                candidates.append((clearance, track.track_id, session.session_id))
        candidates.sort()
        bound: List[Tuple[str, str]] = []
        for _, track_id, session_id in candidates:
            session = self.sessions[session_id]
            track = self.tracks[track_id]
            if session.bound_track is not None or track.claimed_by is not None:
                continue
            session.bound_track = track_id
            track.claimed_by = session_id
            bound.append((session_id, track_id))
        return bound

    def refresh_after_bind(self, pairs: List[Tuple[str, str]]) -> List[SessionUpdate]:
        updates = []
        for session_id, _ in pairs:
            update = self._refresh(self.sessions[session_id])
            updates.append(
                SessionUpdate(
                    session_id=update.session_id,
                    active=update.active,
                    zone=update.zone,
                    anchor_u=update.anchor_u,
                    clearance=update.clearance,
                    bound_track=update.bound_track,
                    activation_changed=True,
                    zone_changed=True,
                    anchor_changed=True,
                    binding_changed=True,
                )
            )
        return updates

    # --- ring feedback ------------------------------------------------------

    def ring_states(self) -> Dict[str, RingState]:
        """Bottom-of-screen ring anchor for every tracked body."""
        rings = {}
        for track in self.tracks.values():
            pp, clearance = project_to_perimeter(track.pos, self.room)
            session = self.sessions.get(track.claimed_by) if track.claimed_by else None
            active = session.activation.active if session else False
            rings[track.track_id] = RingState(
                track_id=track.track_id,
                u=arc_to_pixel(pp.s, self.room),
                active=active,
                session_id=track.claimed_by,
            )
        return rings
