"""The hub: one logical event loop owning all state mutation.

Phones, the voice feed, the tracker, and the task engine are write
clients; displays are read-only. Envelopes are applied strictly in
arrival order. Each applied envelope that changes anything produces
exactly one revision and one state-diff broadcast; every inbound write
envelope is answered with exactly one ack or one error. Duplicate
sequence numbers are acknowledged but not re-applied, which makes
delivery idempotent across phone reconnects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .corpus import ContentProvider, CorpusManifest, UnparseableUtterance
from .eventlog import LINE_CTL, LINE_DIFF, LINE_ENV
from .geometry import FloorPoint, RoomSpec
from .messages import (
    KIND_ACK,
    KIND_DIFF,
    KIND_ERROR,
    KIND_GESTURE,
    KIND_PING,
    KIND_PONG,
    KIND_PROMPT,
    KIND_REGISTER_OK,
    KIND_SNAPSHOT,
    KIND_TRACKS,
    KIND_VOICE,
    Envelope,
)
from .sessions import RegistryConfig, Session, SessionRegistry, TrackSnapshot
from .state import Event, InteractionConfig, InteractionError, WallState

ROLE_PAD = "pad"
ROLE_VOICE = "voice"
ROLE_TRACKER = "tracker"
ROLE_ENGINE = "engine"
ROLE_DISPLAY = "display"

_ALLOWED_KINDS = {
    ROLE_PAD: {KIND_GESTURE, KIND_PING, KIND_PONG},
    ROLE_VOICE: {KIND_VOICE, KIND_PING, KIND_PONG},
    ROLE_TRACKER: {KIND_TRACKS, KIND_PING, KIND_PONG},
    ROLE_ENGINE: {KIND_PROMPT, KIND_PING, KIND_PONG},
    ROLE_DISPLAY: {KIND_PING, KIND_PONG},
}


@dataclass
class Heartbeat:
    """Per-connection liveness: ping every interval, dead after 2 misses."""

    interval_ms: int = 5000
    max_missed: int = 2
    _next_ping_at: int = 0
    _outstanding: int = 0

    def start(self, now: int) -> None:
        self._next_ping_at = now + self.interval_ms
        self._outstanding = 0

    def poll(self, now: int) -> Optional[str]:
        """Returns "ping" when one is due, "dead" when the peer missed too many."""
        if now < self._next_ping_at:
            return None
        if self._outstanding >= self.max_missed:
            return "dead"
        self._outstanding += 1
        self._next_ping_at = now + self.interval_ms
        return "ping"

    def on_pong(self, now: int) -> None:
        self._outstanding = 0


@dataclass
class DispatchResult:
    reply: Optional[Envelope]
    diff: Optional[Envelope]
    events: List[Event] = field(default_factory=list)
    applied: bool = False
    error_code: Optional[str] = None
    revision: int = 0


class Hub:
    """Authoritative mediator between clients and the wall state."""

    def __init__(
        self,
        room: RoomSpec,
        manifest: CorpusManifest,
        seed: int = 0,
        interaction: InteractionConfig = InteractionConfig(),
        registry_config: RegistryConfig = RegistryConfig(),
        id_factory: Optional[Callable[[], Tuple[str, str]]] = None,
        log: Optional[object] = None,
    ) -> None:
        self.room = room
        self.state = WallState(room, interaction)
        self.provider = ContentProvider(
            manifest, seed=seed, id_factory=self.state.alloc_card_id
        )
        registry_kwargs = {"id_factory": id_factory} if id_factory else {}
        self.registry = SessionRegistry(room, registry_config, **registry_kwargs)
        self.revision = 0
        self.log = log
        self.listeners: List[Callable[[List[Event], int, int], None]] = []
        self._out_seq = 0
        self._clients: Dict[str, dict] = {}  # connection-scoped senders
        self._started = False

    # --- boot-time setup (before revision 0 is published) --------------------

    def boot_fill_columns(
        self, per_column: Optional[int] = None, exclude_tags: Tuple[str, ...] = ()
    ) -> None:
        assert not self._started, "boot after start"
        n = per_column if per_column is not None else self.state.config.boot_fill
        for side in ("left", "right"):
            for i in range(self.room.columns_per_side):
                cards = self.provider.random_fill(
                    n, seed=f"boot:{side}:{i}", exclude_tags=exclude_tags
                )
                self.state.set_column_cards(side, i, cards)

    def boot_shared_layout(self, texts: List[dict], targets: List[dict]) -> None:
        assert not self._started, "boot after start"
        self.state.setup_shared_layout(texts, targets)

    def boot_inject_card(self, side: str, index: int, entry) -> None:
        """Append one known corpus image to a column during game setup."""
        assert not self._started, "boot after start"
        from .corpus import ImageCard

        col = self.state.columns[(side, index)]
        card = ImageCard(
            image_id=self.state.alloc_card_id(),
            source_ref=entry.path,
            tags=set(entry.tags),
        )
        self.state.set_column_cards(side, index, col.cards + [card])

    def initial_snapshot(self) -> dict:
        self._started = True
        return self.state.to_snapshot(0)

    # --- outbound helpers -----------------------------------------------------

    def _send(self, kind: str, body: dict, now: int) -> Envelope:
        self._out_seq += 1
        return Envelope(kind=kind, seq=self._out_seq, sid="hub", ts=now, body=body)

    def snapshot_envelope(self, now: int) -> Envelope:
        return self._send(
            KIND_SNAPSHOT,
            {"revision": self.revision, "state": self.state.to_snapshot(self.revision)},
            now,
        )

    def commit(self, changes: List[dict], now: int) -> Optional[Envelope]:
        """Publish out-of-band state changes (setup, lifecycle) as one revision.

        Unlike envelope-driven changes these have no sender to replay, so
        the control line carries the change records themselves.
        """
        if self.log is not None and changes:
            self.log.append(
                {"line": LINE_CTL, "op": "apply", "ts": now, "changes": changes}
            )
        return self._commit(changes, now)

    def _commit(self, changes: List[dict], now: int) -> Optional[Envelope]:
        if not changes:
            return None
        self.revision += 1
        diff = self._send(KIND_DIFF, {"revision": self.revision, "changes": changes}, now)
        if self.log is not None:
            self.log.append(
                {"line": LINE_DIFF, "rev": self.revision, "changes": changes}
            )
        return diff

    def restore_snapshot(self, snapshot: dict) -> None:
        """Adopt a recorded snapshot as the authoritative state (replay)."""
        self.state = WallState.restore(snapshot, self.room, self.state.config)
        self.provider = ContentProvider(
            self.provider.manifest,
            seed=self.provider.seed,
            id_factory=self.state.alloc_card_id,
        )
        self.revision = snapshot["revision"]
        self._started = True

    def apply_recorded_changes(self, changes: List[dict], now: int) -> None:
        """Replay counterpart of :meth:`commit`: apply changes structurally."""
        from .state import apply_changes

        snapshot = apply_changes(self.state.to_snapshot(self.revision), changes)
        self.restore_snapshot(snapshot)
        self._commit(changes, now)

    def _notify(self, events: List[Event], now: int) -> None:
        for listener in self.listeners:
            listener(events, self.revision, now)

    # --- session lifecycle ------------------------------------------------------

    def register_pad(
        self,
        side_token: str,
        now: int,
        fixed: Optional[Tuple[str, str]] = None,
    ) -> Tuple[Session, Envelope, Optional[Envelope]]:
        """Register a phone; returns (session, register_ok, roster diff).

        ``fixed`` pins (session_id, resume_token), which replay uses to
        reproduce a recorded run exactly.
        """
        if fixed is not None:
            from .sessions import parse_side_token

            session = self.registry.register_fixed(
                parse_side_token(side_token), fixed[0], fixed[1], now
            )
        else:
            session = self.registry.register_session(side_token, now)
        _, changes = self.state.add_session(session.session_id, session.side.value)
        diff = self._commit(changes, now)
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_CTL,
                    "op": "register",
                    "ts": now,
                    "sid": session.session_id,
                    "side": session.side.value,
                    "resume": session.resume_token,
                    "epoch": session.epoch,
                }
            )
        ok = self._send(
            KIND_REGISTER_OK,
            {
                "session_id": session.session_id,
                "side": session.side.value,
                "resume_token": session.resume_token,
                "epoch": session.epoch,
            },
            now,
        )
        return session, ok, diff

    def resume_pad(self, resume_token: str, now: int) -> Tuple[Session, Envelope, Optional[Envelope]]:
        session = self.registry.resume_session(resume_token, now)
        changes = self.state.set_session_flags(session.session_id, connected=True)
        diff = self._commit(changes, now)
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_CTL,
                    "op": "resume",
                    "ts": now,
                    "sid": session.session_id,
                    "epoch": session.epoch,
                }
            )
        ok = self._send(
            KIND_REGISTER_OK,
            {
                "session_id": session.session_id,
                "side": session.side.value,
                "resume_token": session.resume_token,
                "epoch": session.epoch,
            },
            now,
        )
        return session, ok, diff

    def disconnect_pad(self, sid: str, now: int) -> Optional[Envelope]:
        """Connection died; the session survives for the resume TTL."""
        self.registry.mark_disconnected(sid, now)
        changes = []
        if sid in self.state.sessions:
            changes = self.state.set_session_flags(sid, connected=False)
        diff = self._commit(changes, now)
        if self.log is not None:
            self.log.append({"line": LINE_CTL, "op": "disconnect", "ts": now, "sid": sid})
        return diff

    def connect_client(self, client_id: str, now: int) -> int:
        """Connection-scoped sender (tracker/engine) starts a new epoch."""
        entry = self._clients.setdefault(client_id, {"epoch": 0, "last_seq": 0})
        entry["epoch"] += 1
        entry["last_seq"] = 0
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_CTL,
                    "op": "connect",
                    "ts": now,
                    "sid": client_id,
                    "epoch": entry["epoch"],
                }
            )
        return entry["epoch"]

    # --- dispatch ----------------------------------------------------------------

    def dispatch(self, env: Envelope, role: str, epoch: int, now: int) -> DispatchResult:
        """Apply one envelope in arrival order.

        Listeners are notified only after the envelope and its diff are
        committed and logged: anything they send in response becomes a later
        envelope in the canonical history, never an interleaved one.
        """
        result = self._dispatch_inner(env, role, epoch, now)
        result.revision = self.revision
        if self.log is not None and env.kind not in (KIND_PING, KIND_PONG):
            self.log.append(
                {
                    "line": LINE_ENV,
                    "role": role,
                    "epoch": epoch,
                    "env": {
                        "v": env.v,
                        "kind": env.kind,
                        "seq": env.seq,
                        "sid": env.sid,
                        "ts": env.ts,
                        "body": env.body,
                    },
                    "applied": result.applied,
                    "error": result.error_code,
                    "rev": result.revision,
                }
            )
        if result.events:
            self._notify(result.events, now)
        return result

    def _error(self, env: Envelope, code: str, message: str, now: int) -> DispatchResult:
        reply = self._send(
            KIND_ERROR, {"code": code, "message": message, "of": env.seq}, now
        )
        return DispatchResult(reply=reply, diff=None, error_code=code)

    def _ack(self, env: Envelope, applied: bool, now: int) -> Envelope:
        return self._send(
            KIND_ACK, {"of": env.seq, "applied": applied, "revision": self.revision}, now
        )

    def _dispatch_inner(self, env: Envelope, role: str, epoch: int, now: int) -> DispatchResult:
        if env.kind == KIND_PING:
            return DispatchResult(
                reply=self._send(KIND_PONG, {"echo": env.ts}, now), diff=None
            )
        if env.kind == KIND_PONG:
            return DispatchResult(reply=None, diff=None)
        allowed = _ALLOWED_KINDS.get(role, set())
        if env.kind not in allowed:
            return self._error(
                env, "forbidden_kind", f"role {role!r} may not send {env.kind!r}", now
            )

        if env.kind == KIND_GESTURE:
            return self._handle_session_kind(env, role, epoch, now, voice=False)
        if env.kind == KIND_VOICE:
            return self._handle_session_kind(env, role, epoch, now, voice=True)
        if env.kind == KIND_TRACKS:
            return self._handle_client_kind(env, epoch, now, self._apply_tracks)
        if env.kind == KIND_PROMPT:
            return self._handle_client_kind(env, epoch, now, self._apply_prompt)
        return self._error(env, "unknown_kind", f"unhandled kind {env.kind!r}", now)

    # --- session-scoped senders (pads and voice feeds) -------------------------

    def _handle_session_kind(
        self, env: Envelope, role: str, epoch: int, now: int, voice: bool
    ) -> DispatchResult:
        session = self.registry.sessions.get(env.sid)
        if session is None:
            return self._error(env, "unknown_session", f"no session {env.sid!r}", now)
        if epoch < session.epoch:
            return self._error(
                env, "stale_epoch", f"epoch {epoch} superseded by {session.epoch}", now
            )
        last = session.voice_seq if voice else session.phone_seq
        if env.seq <= last:
            return DispatchResult(reply=self._ack(env, applied=False, now=now), diff=None)
        if voice:
            session.voice_seq = env.seq
        else:
            session.phone_seq = env.seq
        if not (session.bound_track and session.activation.active):
            return self._error(
                env, "inactive_session", "step within 2 m of your wall to interact", now
            )
        try:
            if voice:
                events, changes = self.state.apply_voice(
                    env.sid, env.body["transcript"], self.provider
                )
            else:
                events, changes = self.state.apply_gesture(
                    env.sid,
                    env.body["gesture"],
                    dx=env.body.get("dx", 0.0),
                    dy=env.body.get("dy", 0.0),
                    scale=env.body.get("scale"),
                )
        except UnparseableUtterance:
            events, changes = self.state.show_error_prompt(
                env.sid, "Sorry, I did not catch that."
            )
            diff = self._commit(changes, now)
            reply = self._send(
                KIND_ERROR,
                {"code": "unparseable_utterance", "message": "no topic understood", "of": env.seq},
                now,
            )
            return DispatchResult(
                reply=reply, diff=diff, events=events, error_code="unparseable_utterance"
            )
        except InteractionError as e:
            return self._error(env, e.code, str(e), now)
        diff = self._commit(changes, now)
        return DispatchResult(
            reply=self._ack(env, applied=True, now=now), diff=diff, events=events, applied=True
        )

    # --- connection-scoped senders (tracker, engine) -----------------------------

    def _handle_client_kind(
        self, env: Envelope, epoch: int, now: int, apply: Callable
    ) -> DispatchResult:
        entry = self._clients.get(env.sid)
        if entry is None:
            return self._error(env, "unknown_session", f"client {env.sid!r} never connected", now)
        if epoch < entry["epoch"]:
            return self._error(
                env, "stale_epoch", f"epoch {epoch} superseded by {entry['epoch']}", now
            )
        if env.seq <= entry["last_seq"]:
            return DispatchResult(reply=self._ack(env, applied=False, now=now), diff=None)
        entry["last_seq"] = env.seq
        try:
            events, changes = apply(env, now)
        except InteractionError as e:
            return self._error(env, e.code, str(e), now)
        diff = self._commit(changes, now)
        return DispatchResult(
            reply=self._ack(env, applied=True, now=now), diff=diff, events=events, applied=True
        )

    def _apply_tracks(self, env: Envelope, now: int) -> Tuple[List[Event], List[dict]]:
        entries = []
        for item in env.body["tracks"]:
            x, y = item.get("x"), item.get("y")
            if isinstance(x, bool) or isinstance(y, bool):
                x = y = float("nan")
            try:
                fx, fy = float(x), float(y)
            except (TypeError, ValueError):
                fx = fy = float("nan")
            entries.append((str(item["id"]), FloorPoint(fx, fy)))
        snap = TrackSnapshot(entries=tuple(entries), captured_at=env.ts)
        self.registry.ingest_snapshot(snap)
        pairs = self.registry.bind_sessions()
        self.registry.refresh_after_bind(pairs)

        events: List[Event] = []
        changes: List[dict] = []
        for session in self.registry.sessions.values():
            bound = session.bound_track is not None
            ev, ch = self.state.apply_physical_move(
                session.session_id,
                active=session.activation.active,
                zone_key=session.zone_key if bound else None,
                anchor_u=session.anchor_u,
                bound=bound,
            )
            events.extend(ev)
            changes.extend(ch)
        rings = self.registry.ring_states()
        for tid, ring in rings.items():
            changes.extend(self.state.set_ring(tid, ring.u, ring.active, ring.session_id))
        for tid in list(self.state.rings):
            if tid not in rings:
                changes.extend(self.state.drop_ring(tid))
        return events, changes

    def _apply_prompt(self, env: Envelope, now: int) -> Tuple[List[Event], List[dict]]:
        body = env.body
        if body["action"] == "show":
            p = body["prompt"]
            return self.state.show_prompt(
                p["id"], p.get("sid"), p["text"], p.get("style", "task")
            )
        return self.state.clear_prompt(body["prompt_id"])
