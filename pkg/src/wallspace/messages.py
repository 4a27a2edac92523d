"""Wire messages between phones, voice feeds, the tracker, displays and the hub.

Everything on the wire is one canonical-JSON envelope: protocol version,
message kind, a per-sender sequence number counting from 1, the sender's
session/client id, a millisecond timestamp, and a kind-specific body.
Canonical means UTF-8, sorted keys, no whitespace, no NaN; two equal
envelopes always encode to identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, List, Optional

PROTOCOL_VERSION = 1

KIND_REGISTER_OK = "register_ok"
KIND_GESTURE = "gesture"
KIND_VOICE = "voice"
KIND_TRACKS = "tracks"
KIND_SNAPSHOT = "state_snapshot"
KIND_DIFF = "state_diff"
KIND_PROMPT = "prompt"
KIND_ACK = "ack"
KIND_ERROR = "error"
KIND_PING = "ping"
KIND_PONG = "pong"

KINDS = frozenset(
    {
        KIND_REGISTER_OK,
        KIND_GESTURE,
        KIND_VOICE,
        KIND_TRACKS,
        KIND_SNAPSHOT,
        KIND_DIFF,
        KIND_PROMPT,
        KIND_ACK,
        KIND_ERROR,
        KIND_PING,
        KIND_PONG,
    }
)

GESTURES = frozenset(
    {
        "move",
        "tap",
        "swipe_left",
        "swipe_right",
        "swipe_up",
        "swipe_down",
        "pinch",
        "zoom",
        "double_tap",
        "long_tap",
    }
)

# Gestures a write client may send; the set the phone recognizer must cover.
GESTURE_KINDS = tuple(sorted(GESTURES))


class DecodeError(Exception):
    """Malformed or out-of-contract message; carries where it went wrong."""

    def __init__(self, message: str, at: str = "$", code: str = "decode_error") -> None:
        super().__init__(f"{message} (at {at})")
        self.at = at
        self.code = code


@dataclass(frozen=True)
class Envelope:
    kind: str
    seq: int
    sid: str
    ts: int
    body: dict
    v: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class GestureMsg:
    gesture: str
    dx: Optional[float] = None
    dy: Optional[float] = None
    scale: Optional[float] = None

    def to_body(self) -> dict:
        body: dict[str, Any] = {"gesture": self.gesture}
        if self.dx is not None:
            body["dx"] = self.dx
        if self.dy is not None:
            body["dy"] = self.dy
        if self.scale is not None:
            body["scale"] = self.scale
        return body

    @classmethod
    def from_body(cls, body: dict) -> "GestureMsg":
        return cls(
            gesture=body["gesture"],
            dx=body.get("dx"),
            dy=body.get("dy"),
            scale=body.get("scale"),
        )


@dataclass(frozen=True)
class VoiceMsg:
    transcript: str
    confidence: Optional[float] = None

    def to_body(self) -> dict:
        body: dict[str, Any] = {"transcript": self.transcript}
        if self.confidence is not None:
            body["confidence"] = self.confidence
        return body

    @classmethod
    def from_body(cls, body: dict) -> "VoiceMsg":
        return cls(transcript=body["transcript"], confidence=body.get("confidence"))


@dataclass(frozen=True)
class TrackMsg:
    tracks: List[dict] = field(default_factory=list)

    def to_body(self) -> dict:
        return {"tracks": list(self.tracks)}

    @classmethod
    def from_body(cls, body: dict) -> "TrackMsg":
        return cls(tracks=list(body["tracks"]))


def _fail(msg: str, at: str, code: str = "decode_error") -> None:
    raise DecodeError(msg, at=at, code=code)


def _expect_number(value: Any, at: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"expected number, got {type(value).__name__}", at)
    if not math.isfinite(value):
        _fail("non-finite number", at)
    return float(value)


def _expect_int(value: Any, at: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"expected integer, got {type(value).__name__}", at)
    if minimum is not None and value < minimum:
        _fail(f"expected >= {minimum}, got {value}", at)
    return value


def _expect_str(value: Any, at: str, nonempty: bool = False) -> str:
    if not isinstance(value, str):
        _fail(f"expected string, got {type(value).__name__}", at)
    if nonempty and not value:
        _fail("expected non-empty string", at)
    return value


def _validate_gesture(body: dict) -> None:
    gesture = _expect_str(body.get("gesture"), "$.body.gesture", nonempty=True)
    if gesture not in GESTURES:
        _fail(f"unknown gesture {gesture!r}", "$.body.gesture")
    allowed = {"gesture"}
    if gesture == "move":
        allowed |= {"dx", "dy"}
        for k in ("dx", "dy"):
            v = _expect_number(body.get(k, 0.0), f"$.body.{k}")
            if not -1.0 <= v <= 1.0:
                _fail(f"{k} outside [-1, 1]", f"$.body.{k}")
    elif gesture in ("pinch", "zoom"):
        allowed |= {"scale"}
        if "scale" in body:
            v = _expect_number(body["scale"], "$.body.scale")
            if v <= 0:
                _fail("scale must be > 0", "$.body.scale")
    extra = set(body) - allowed
    if extra:
        _fail(f"fields {sorted(extra)} not allowed for {gesture!r}", "$.body")


def _validate_voice(body: dict) -> None:
    _expect_str(body.get("transcript"), "$.body.transcript", nonempty=True)
    if body.get("confidence") is not None:
        c = _expect_number(body["confidence"], "$.body.confidence")
        if not 0.0 <= c <= 1.0:
            _fail("confidence outside [0, 1]", "$.body.confidence")


def _validate_tracks(body: dict) -> None:
    tracks = body.get("tracks")
    if not isinstance(tracks, list):
        _fail("tracks must be a list", "$.body.tracks")
    for i, entry in enumerate(tracks):
        if not isinstance(entry, dict) or "id" not in entry:
            _fail("track entry must be an object with an id", f"$.body.tracks[{i}]")
        # x/y left loosely typed: entries with bad coordinates are skipped
        # (and counted) at ingestion rather than poisoning the snapshot.


def _validate_snapshot(body: dict) -> None:
    _expect_int(body.get("revision"), "$.body.revision", minimum=0)
    if not isinstance(body.get("state"), dict):
        _fail("state must be an object", "$.body.state")


def _validate_diff(body: dict) -> None:
    _expect_int(body.get("revision"), "$.body.revision", minimum=1)
    changes = body.get("changes")
    if not isinstance(changes, list):
        _fail("changes must be a list", "$.body.changes")
    for i, ch in enumerate(changes):
        if not isinstance(ch, dict) or "op" not in ch:
            _fail("change must be an object with an op", f"$.body.changes[{i}]")


def _validate_prompt(body: dict) -> None:
    action = _expect_str(body.get("action"), "$.body.action", nonempty=True)
    if action == "show":
        p = body.get("prompt")
        if not isinstance(p, dict):
            _fail("show requires a prompt object", "$.body.prompt")
        _expect_str(p.get("id"), "$.body.prompt.id", nonempty=True)
        _expect_str(p.get("text"), "$.body.prompt.text", nonempty=True)
    elif action == "clear":
        _expect_str(body.get("prompt_id"), "$.body.prompt_id", nonempty=True)
    else:
        _fail(f"unknown prompt action {action!r}", "$.body.action")


def _validate_ack(body: dict) -> None:
    _expect_int(body.get("of"), "$.body.of", minimum=1)
    if not isinstance(body.get("applied"), bool):
        _fail("applied must be a boolean", "$.body.applied")
    _expect_int(body.get("revision"), "$.body.revision", minimum=0)


def _validate_error(body: dict) -> None:
    _expect_str(body.get("code"), "$.body.code", nonempty=True)
    _expect_str(body.get("message"), "$.body.message")
    if "of" in body:
        _expect_int(body["of"], "$.body.of", minimum=1)


def _validate_register_ok(body: dict) -> None:
    _expect_str(body.get("session_id"), "$.body.session_id", nonempty=True)
    if body.get("side") not in ("left", "right"):
        _fail("side must be left or right", "$.body.side")
    _expect_str(body.get("resume_token"), "$.body.resume_token", nonempty=True)
    _expect_int(body.get("epoch"), "$.body.epoch", minimum=1)


def _validate_pong(body: dict) -> None:
    if "echo" in body:
        _expect_int(body["echo"], "$.body.echo", minimum=0)


_VALIDATORS = {
    KIND_GESTURE: _validate_gesture,
    KIND_VOICE: _validate_voice,
    KIND_TRACKS: _validate_tracks,
    KIND_SNAPSHOT: _validate_snapshot,
    KIND_DIFF: _validate_diff,
    KIND_PROMPT: _validate_prompt,
    KIND_ACK: _validate_ack,
    KIND_ERROR: _validate_error,
    KIND_REGISTER_OK: _validate_register_ok,
    KIND_PING: lambda body: None,
    KIND_PONG: _validate_pong,
}


def validate_envelope(env: Envelope) -> Envelope:
    if env.v != PROTOCOL_VERSION:
        _fail(f"unsupported protocol version {env.v}", "$.v", code="bad_version")
    if env.kind not in KINDS:
        _fail(f"unknown kind {env.kind!r}", "$.kind", code="unknown_kind")
    _expect_int(env.seq, "$.seq", minimum=1)
    _expect_str(env.sid, "$.sid", nonempty=True)
    _expect_int(env.ts, "$.ts", minimum=0)
    if not isinstance(env.body, dict):
        _fail("body must be an object", "$.body")
    _VALIDATORS[env.kind](env.body)
    return env


def encode(env: Envelope) -> bytes:
    """Canonical UTF-8 JSON bytes for an envelope."""
    validate_envelope(env)
    obj = {
        "v": env.v,
        "kind": env.kind,
        "seq": env.seq,
        "sid": env.sid,
        "ts": env.ts,
        "body": env.body,
    }
    return json.dumps(
        obj, separators=(",", ":"), sort_keys=True, ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def _reject_constant(name: str) -> None:
    raise DecodeError(f"non-finite constant {name} not allowed", at="$")


def decode(data: bytes | str) -> Envelope:
    """Parse and validate one envelope; inverse of :func:`encode`."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8: {e}", at=f"byte {e.start}") from e
    try:
        obj = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise DecodeError(
            f"invalid JSON: {e.msg}", at=f"line {e.lineno} col {e.colno}"
        ) from e
    if not isinstance(obj, dict):
        _fail("top level must be an object", "$")
    extra = set(obj) - {"v", "kind", "seq", "sid", "ts", "body"}
    if extra:
        _fail(f"unexpected fields {sorted(extra)}", "$")
    for key in ("v", "kind", "seq", "sid", "ts", "body"):
        if key not in obj:
            _fail(f"missing field {key!r}", "$")
    env = Envelope(
        v=obj["v"],
        kind=obj["kind"],
        seq=obj["seq"],
        sid=obj["sid"],
        ts=obj["ts"],
        body=obj["body"],
    )
    return validate_envelope(env)


def canonical_json(obj: Any) -> str:
    """Canonical JSON text used for logs and structural state comparison."""
    return json.dumps(
        obj, separators=(",", ":"), sort_keys=True, ensure_ascii=False, allow_nan=False
    )
