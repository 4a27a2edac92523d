"""Authoritative wall state: columns, cursors, highlights, and the front screen.

One instance of :class:`WallState` is the single source of truth for what
the wall shows. Every transition returns (events, changes): events are
typed records consumed by the task engine and tests; changes are
JSON-shaped records that, applied in order to the previous snapshot,
reproduce the next snapshot exactly. Displays are driven only by those
snapshots and change records.

Gesture semantics follow the phone-trackpad mapping: move drives the
cursor (and a held image on the shared screen), tap toggles selection,
horizontal swipes stage selected images toward the front screen, vertical
swipes scroll the column, pinch/zoom/double-tap resize the selection, and
long-tap toggles drag mode over the shared area. Body position, not the
phone, picks the column.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .corpus import ContentProvider, ImageCard, parse_query
from .geometry import RoomSpec, Wall

SIDES = ("left", "right")


class InteractionError(Exception):
    """Rejected input; ``code`` goes out on the wire as an error reply."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class NoSelection(InteractionError):
    def __init__(self, message: str = "no card selected") -> None:
        super().__init__("no_selection", message)


class NotInPersonalColumn(InteractionError):
    def __init__(self, message: str = "image not in your personal column") -> None:
        super().__init__("not_in_personal_column", message)


class NoSurface(InteractionError):
    def __init__(self, message: str = "no interactive surface here") -> None:
        super().__init__("no_surface", message)


class NotOnColumn(InteractionError):
    def __init__(self, message: str = "voice population needs a side column") -> None:
        super().__init__("not_on_column", message)


@dataclass(frozen=True)
class InteractionConfig:
    visible_cards: int = 4
    boot_fill: int = 8
    pad_gain_v: int = 1200   # pixels per full-pad vertical swipe
    pad_gain_u: int = 2000   # pixels per full-pad horizontal swipe on shared
    resize_step: float = 1.25
    double_tap_scale: float = 2.0
    personal_front_width_m: float = 1.5
    card_w_px: int = 300
    card_h_px: int = 300


# --- events ------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    pass


@dataclass(frozen=True)
class HighlightChanged(Event):
    sid: str
    old: Optional[Tuple[str, int]]
    new: Optional[Tuple[str, int]]


@dataclass(frozen=True)
class ActivationChanged(Event):
    sid: str
    active: bool


@dataclass(frozen=True)
class CursorMoved(Event):
    sid: str
    surface: tuple
    u: int
    v: int


@dataclass(frozen=True)
class ColumnScrolled(Event):
    sid: str
    side: str
    index: int
    old: int
    new: int


@dataclass(frozen=True)
class CardSelected(Event):
    sid: str
    surface: tuple
    image_id: str
    selected: bool


@dataclass(frozen=True)
class CardsMovedToFront(Event):
    sid: str
    side: str
    index: int
    image_ids: Tuple[str, ...]


@dataclass(frozen=True)
class ColumnPopulated(Event):
    sid: str
    side: str
    index: int
    query: str
    count: int


@dataclass(frozen=True)
class PlacedOnShared(Event):
    sid: str
    image_id: str
    u: int
    v: int
    tags: Tuple[str, ...]


@dataclass(frozen=True)
class DragChanged(Event):
    sid: str
    image_id: Optional[str]
    started: bool
    u: int
    v: int
    tags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class PromptShown(Event):
    pid: str
    sid: Optional[str]
    text: str
    style: str


@dataclass(frozen=True)
class PromptCleared(Event):
    pid: str


Changes = List[dict]
Events = List[Event]


def card_to_dict(card: ImageCard) -> dict:
    return {
        "id": card.image_id,
        "src": card.source_ref,
        "tags": sorted(card.tags),
        "scale": card.scale,
        "sel": card.selected_by,
    }


def card_from_dict(d: dict) -> ImageCard:
    return ImageCard(
        image_id=d["id"],
        source_ref=d["src"],
        tags=set(d["tags"]),
        scale=d["scale"],
        selected_by=d["sel"],
    )


@dataclass
class ColumnState:
    side: str
    index: int
    cards: List[ImageCard] = field(default_factory=list)
    scroll_offset: int = 0
    populated_query: Optional[str] = None

    def max_offset(self, visible: int) -> int:
        return max(0, len(self.cards) - visible)

    def to_dict(self) -> dict:
        return {
            "cards": [card_to_dict(c) for c in self.cards],
            "scroll": self.scroll_offset,
            "query": self.populated_query,
        }


@dataclass
class PlacedImage:
    card: ImageCard
    u: int
    v: int

    def to_dict(self) -> dict:
        return {"card": card_to_dict(self.card), "u": self.u, "v": self.v}


@dataclass
class Cursor:
    surface: tuple  # ("column", side, index) | ("personal",) | ("shared",)
    u: int
    v: int

    def to_dict(self) -> dict:
        return {"surface": list(self.surface), "u": self.u, "v": self.v}


class WallState:
    """Mutable authoritative state plus snapshot/diff plumbing."""

    def __init__(self, room: RoomSpec, config: InteractionConfig = InteractionConfig()) -> None:
        self.room = room
        self.config = config
        self.columns: Dict[Tuple[str, int], ColumnState] = {
            (side, i): ColumnState(side, i)
            for side in SIDES
            for i in range(room.columns_per_side)
        }
        self.sessions: Dict[str, dict] = {}  # sid -> {side, active, bound, connected}
        self.front_order: List[str] = []
        self.personal_front: Dict[str, List[ImageCard]] = {}
        self.texts: List[dict] = []
        self.targets: List[dict] = []
        self.placed: Dict[str, PlacedImage] = {}
        self.drag: Dict[str, Optional[str]] = {}
        self.highlights: Dict[str, Optional[Tuple[str, int]]] = {}
        self.column_locks: Dict[Tuple[str, int], str] = {}
        self.cursors: Dict[str, Cursor] = {}
        self.rings: Dict[str, dict] = {}
        self.prompts: Dict[str, dict] = {}
        self.next_card = 0
        self.next_prompt = 0

    # --- id allocation (deterministic, snapshot-carried) --------------------

    def alloc_card_id(self) -> str:
        cid = f"c{self.next_card}"
        self.next_card += 1
        return cid

    def _alloc_prompt_id(self) -> str:
        pid = f"sp{self.next_prompt}"
        self.next_prompt += 1
        return pid

    def _meta_change(self) -> dict:
        return {"op": "meta", "value": {"next_card": self.next_card, "next_prompt": self.next_prompt}}

    # --- geometry helpers ----------------------------------------------------

    def _px_per_m(self) -> float:
        return self.room.px_w / self.room.perimeter_m()

    def column_span_px(self, side: str, index: int) -> Tuple[int, int]:
        wall = Wall.LEFT if side == "left" else Wall.RIGHT
        start = self.room.wall_start(wall)
        cw = self.room.wall_length(wall) / self.room.columns_per_side
        lo = start + index * cw
        scale = self._px_per_m()
        return int(lo * scale), int((lo + cw) * scale)

    def column_center_u(self, side: str, index: int) -> int:
        lo, hi = self.column_span_px(side, index)
        return (lo + hi) // 2

    def front_partition(self) -> dict:
        """Front-wall pixel spans: one personal strip per session, shared middle."""
        scale = self._px_per_m()
        w = self.room.width_m
        pw = self.config.personal_front_width_m
        personal: Dict[str, List[int]] = {}
        left_edge, right_edge = 0.0, w
        for sid in self.front_order:
            side = self.sessions[sid]["side"]
            if side == "left":
                personal[sid] = [int(left_edge * scale), int((left_edge + pw) * scale)]
                left_edge += pw
            else:
                personal[sid] = [int((right_edge - pw) * scale), int(right_edge * scale)]
                right_edge -= pw
        return {
            "personal": personal,
            "shared": [int(left_edge * scale), int(right_edge * scale)],
        }

    def shared_span(self) -> Tuple[int, int]:
        lo, hi = self.front_partition()["shared"]
        return lo, hi

    def _front_surface_for(self, sid: str, anchor_u: int) -> tuple:
        part = self.front_partition()
        span = part["personal"].get(sid)
        if span and span[0] <= anchor_u < span[1]:
            return ("personal",)
        return ("shared",)

    # --- session roster -------------------------------------------------------

    def add_session(self, sid: str, side: str) -> Tuple[Events, Changes]:
        self.sessions[sid] = {"side": side, "active": False, "bound": False, "connected": True}
        self.front_order.append(sid)
        self.personal_front[sid] = []
        self.highlights[sid] = None
        self.drag[sid] = None
        changes = [
            {"op": "session", "sid": sid, "value": dict(self.sessions[sid])},
            {"op": "personal", "sid": sid, "value": []},
            {"op": "highlight", "sid": sid, "value": None},
            {"op": "drag", "sid": sid, "value": None},
            {"op": "partition", "value": self.front_partition()},
        ]
        return [], changes

    def remove_session(self, sid: str) -> Tuple[Events, Changes]:
        events: Events = []
        changes: Changes = []
        if sid not in self.sessions:
            return events, changes
        if self.drag.get(sid):
            self.drag[sid] = None
        self._release_lock(sid, events, changes)
        for store in (self.sessions, self.personal_front, self.highlights, self.drag):
            store.pop(sid, None)
        self.cursors.pop(sid, None)
        self.front_order.remove(sid)
        changes.extend(
            [
                {"op": "session_gone", "sid": sid},
                {"op": "cursor_gone", "sid": sid},
                {"op": "partition", "value": self.front_partition()},
            ]
        )
        return events, changes

    def set_session_flags(
        self, sid: str, active: Optional[bool] = None,
        bound: Optional[bool] = None, connected: Optional[bool] = None,
    ) -> Changes:
        info = self.sessions[sid]
        before = dict(info)
        if active is not None:
            info["active"] = active
        if bound is not None:
            info["bound"] = bound
        if connected is not None:
            info["connected"] = connected
        if info == before:
            return []
        return [{"op": "session", "sid": sid, "value": dict(info)}]

    # --- column setup ----------------------------------------------------------

    def set_column_cards(
        self, side: str, index: int, cards: List[ImageCard], query: Optional[str] = None
    ) -> Changes:
        col = self.columns[(side, index)]
        col.cards = list(cards)
        col.scroll_offset = 0
        col.populated_query = query
        return [{"op": "column", "side": side, "index": index, "value": col.to_dict()}]

    def setup_shared_layout(self, texts: List[dict], targets: List[dict]) -> Changes:
        self.texts = [dict(t) for t in texts]
        self.targets = [dict(t) for t in targets]
        return [
            {"op": "texts", "value": [dict(t) for t in self.texts]},
            {"op": "targets", "value": [dict(t) for t in self.targets]},
        ]

    # --- rings ------------------------------------------------------------------

    def set_ring(self, track_id: str, u: int, active: bool, sid: Optional[str]) -> Changes:
        value = {"u": u, "active": active, "sid": sid}
        if self.rings.get(track_id) == value:
            return []
        self.rings[track_id] = value
        return [{"op": "ring", "track": track_id, "value": dict(value)}]

    def drop_ring(self, track_id: str) -> Changes:
        if track_id not in self.rings:
            return []
        del self.rings[track_id]
        return [{"op": "ring_gone", "track": track_id}]

    # --- prompts ----------------------------------------------------------------

    def show_prompt(
        self, pid: str, sid: Optional[str], text: str, style: str = "task"
    ) -> Tuple[Events, Changes]:
        value = {"id": pid, "sid": sid, "text": text, "style": style}
        self.prompts[pid] = value
        return (
            [PromptShown(pid=pid, sid=sid, text=text, style=style)],
            [{"op": "prompt", "pid": pid, "value": dict(value)}],
        )

    def clear_prompt(self, pid: str) -> Tuple[Events, Changes]:
        if pid not in self.prompts:
            return [], []
        del self.prompts[pid]
        return [PromptCleared(pid=pid)], [{"op": "prompt_gone", "pid": pid}]

    def show_error_prompt(self, sid: Optional[str], text: str) -> Tuple[Events, Changes]:
        pid = self._alloc_prompt_id()
        events, changes = self.show_prompt(pid, sid, text, style="error")
        changes.append(self._meta_change())
        return events, changes

    # --- physical movement --------------------------------------------------------

    def _release_lock(self, sid: str, events: Events, changes: Changes) -> None:
        held = self.highlights.get(sid)
        if held is not None:
            self.column_locks.pop(held, None)
            self.highlights[sid] = None
            events.append(HighlightChanged(sid=sid, old=held, new=None))
            changes.append({"op": "highlight", "sid": sid, "value": None})

    def _set_cursor(self, sid: str, surface: tuple, u: int, v: int,
                    events: Events, changes: Changes) -> None:
        cur = self.cursors.get(sid)
        if cur and (cur.surface, cur.u, cur.v) == (surface, u, v):
            return
        self.cursors[sid] = Cursor(surface=surface, u=u, v=v)
        events.append(CursorMoved(sid=sid, surface=surface, u=u, v=v))
        changes.append({"op": "cursor", "sid": sid, "value": self.cursors[sid].to_dict()})

    def apply_physical_move(
        self,
        sid: str,
        active: bool,
        zone_key: Optional[tuple],
        anchor_u: Optional[int],
        bound: bool,
    ) -> Tuple[Events, Changes]:
        """Re-derive highlight and cursor surface from a session's position.

        Called for every bound session on every tracker tick; idempotent, so
        unchanged positions produce no events. Ring updates are separate
        (they belong to tracks, not sessions).
        """
        events: Events = []
        changes: Changes = []
        if sid not in self.sessions:
            return events, changes
        info = self.sessions[sid]
        was_active = info["active"]
        if was_active != active or info["bound"] != bound:
            changes.extend(self.set_session_flags(sid, active=active, bound=bound))
            if was_active != active:
                events.append(ActivationChanged(sid=sid, active=active))

        if not bound or not active or zone_key is None:
            self._release_lock(sid, events, changes)
            return events, changes

        region, column = zone_key
        if region in SIDES and column is not None:
            desired = (region, column)
            holder = self.column_locks.get(desired)
            if holder is None or holder == sid:
                if self.highlights.get(sid) != desired:
                    old = self.highlights.get(sid)
                    if old is not None:
                        self.column_locks.pop(old, None)
                    self.column_locks[desired] = sid
                    self.highlights[sid] = desired
                    events.append(HighlightChanged(sid=sid, old=old, new=desired))
                    changes.append({"op": "highlight", "sid": sid, "value": list(desired)})
                v = self.cursors[sid].v if sid in self.cursors else self.room.px_h // 2
                self._set_cursor(
                    sid, ("column", region, column),
                    self.column_center_u(region, column), v, events, changes,
                )
            else:
                # Column already locked by another session: wait, unhighlighted.
                self._release_lock(sid, events, changes)
        elif region == "front_shared":
            self._release_lock(sid, events, changes)
            surface = self._front_surface_for(sid, anchor_u or 0)
            cur = self.cursors.get(sid)
            v = cur.v if cur else self.room.px_h // 2
            if surface == ("personal",):
                span = self.front_partition()["personal"][sid]
                u = (span[0] + span[1]) // 2
            else:
                lo, hi = self.shared_span()
                u = cur.u if (cur and cur.surface == ("shared",)) else (anchor_u or lo)
                u = min(max(u, lo), max(lo, hi - 1))
            if not cur or cur.surface != surface:
                self._set_cursor(sid, surface, u, v, events, changes)
        else:
            # back wall or other non-interactive region
            self._release_lock(sid, events, changes)
        return events, changes

    # --- card lookup ----------------------------------------------------------

    def _slot_height(self) -> int:
        return self.room.px_h // self.config.visible_cards

    def _card_under_cursor(self, sid: str) -> Tuple[Optional[ImageCard], tuple]:
        cur = self.cursors.get(sid)
        if cur is None:
            raise NoSurface()
        slot = min(cur.v // self._slot_height(), self.config.visible_cards - 1)
        if cur.surface[0] == "column":
            col = self.columns[(cur.surface[1], cur.surface[2])]
            idx = col.scroll_offset + slot
            card = col.cards[idx] if 0 <= idx < len(col.cards) else None
            return card, cur.surface
        if cur.surface == ("personal",):
            cards = self.personal_front.get(sid, [])
            card = cards[slot] if slot < len(cards) else None
            return card, cur.surface
        return None, cur.surface

    def _selected_cards(self, sid: str) -> List[Tuple[ImageCard, tuple]]:
        out = []
        for (side, idx), col in self.columns.items():
            for c in col.cards:
                if c.selected_by == sid:
                    out.append((c, ("column", side, idx)))
        for c in self.personal_front.get(sid, []):
            if c.selected_by == sid:
                out.append((c, ("personal",)))
        return out

    def _emit_surface_change(self, surface: tuple, sid: str, changes: Changes) -> None:
        if surface[0] == "column":
            col = self.columns[(surface[1], surface[2])]
            changes.append(
                {"op": "column", "side": surface[1], "index": surface[2], "value": col.to_dict()}
            )
        elif surface == ("personal",):
            changes.append(
                {"op": "personal", "sid": sid,
                 "value": [card_to_dict(c) for c in self.personal_front[sid]]}
            )

    # --- gestures ---------------------------------------------------------------

    def apply_gesture(self, sid: str, gesture: str, dx: float = 0.0, dy: float = 0.0,
                      scale: Optional[float] = None) -> Tuple[Events, Changes]:
        if gesture == "move":
            return self._gesture_move(sid, dx, dy)
        if gesture == "tap":
            return self._gesture_tap(sid)
        if gesture in ("swipe_left", "swipe_right"):
            return self._gesture_swipe_horizontal(sid)
        if gesture in ("swipe_up", "swipe_down"):
            return self._gesture_scroll(sid, +1 if gesture == "swipe_up" else -1)
        if gesture == "pinch":
            return self._gesture_resize(sid, 1.0 / self.config.resize_step)
        if gesture == "zoom":
            return self._gesture_resize(sid, self.config.resize_step)
        if gesture == "double_tap":
            return self._gesture_double_tap(sid)
        if gesture == "long_tap":
            return self._gesture_long_tap(sid)
        raise InteractionError("unknown_gesture", f"unsupported gesture {gesture!r}")

    def _gesture_move(self, sid: str, dx: float, dy: float) -> Tuple[Events, Changes]:
        cur = self.cursors.get(sid)
        if cur is None:
            raise NoSurface()
        events: Events = []
        changes: Changes = []
        v = min(max(int(round(cur.v + dy * self.config.pad_gain_v)), 0), self.room.px_h - 1)
        if cur.surface == ("shared",):
            lo, hi = self.shared_span()
            u = min(max(int(round(cur.u + dx * self.config.pad_gain_u)), lo), max(lo, hi - 1))
        elif cur.surface == ("personal",):
            span = self.front_partition()["personal"][sid]
            u = (span[0] + span[1]) // 2
        else:
            u = self.column_center_u(cur.surface[1], cur.surface[2])
        self._set_cursor(sid, cur.surface, u, v, events, changes)
        held = self.drag.get(sid)
        if cur.surface == ("shared",) and held:
            item = self.placed[held]
            if (item.u, item.v) != (u, v):
                item.u, item.v = u, v
                changes.append({"op": "placed", "image_id": held, "value": item.to_dict()})
        return events, changes

    def _gesture_tap(self, sid: str) -> Tuple[Events, Changes]:
        card, surface = self._card_under_cursor(sid)
        events: Events = []
        changes: Changes = []
        if card is None:
            return events, changes
        if card.selected_by is None:
            card.selected_by = sid
            events.append(CardSelected(sid=sid, surface=surface, image_id=card.image_id, selected=True))
        elif card.selected_by == sid:
            card.selected_by = None
            events.append(CardSelected(sid=sid, surface=surface, image_id=card.image_id, selected=False))
        else:
            return events, changes  # someone else's selection; ignore
        self._emit_surface_change(surface, sid, changes)
        return events, changes

    def _gesture_swipe_horizontal(self, sid: str) -> Tuple[Events, Changes]:
        cur = self.cursors.get(sid)
        if cur is None:
            raise NoSurface()
        if cur.surface[0] == "column":
            side, idx = cur.surface[1], cur.surface[2]
            col = self.columns[(side, idx)]
            moving = [c for c in col.cards if c.selected_by == sid]
            if not moving:
                raise NoSelection("select a card before swiping it to the front")
            events: Events = []
            changes: Changes = []
            col.cards = [c for c in col.cards if c.selected_by != sid]
            col.scroll_offset = min(col.scroll_offset, col.max_offset(self.config.visible_cards))
            for c in moving:
                c.selected_by = None
                self.personal_front[sid].append(c)
            events.append(
                CardsMovedToFront(sid=sid, side=side, index=idx,
                                  image_ids=tuple(c.image_id for c in moving))
            )
            changes.append({"op": "column", "side": side, "index": idx, "value": col.to_dict()})
            changes.append(
                {"op": "personal", "sid": sid,
                 "value": [card_to_dict(c) for c in self.personal_front[sid]]}
            )
            return events, changes
        if cur.surface == ("personal",):
            selected = [c for c in self.personal_front[sid] if c.selected_by == sid]
            if not selected:
                raise NoSelection("select a card in your personal column first")
            events = []
            changes = []
            for c in selected:
                ev, ch = self.place_on_shared(sid, c.image_id)
                events.extend(ev)
                changes.extend(ch)
            return events, changes
        raise NoSelection("nothing to move from the shared screen")

    def _gesture_scroll(self, sid: str, delta: int) -> Tuple[Events, Changes]:
        cur = self.cursors.get(sid)
        if cur is None:
            raise NoSurface()
        if cur.surface[0] != "column":
            return [], []
        side, idx = cur.surface[1], cur.surface[2]
        col = self.columns[(side, idx)]
        new = min(max(col.scroll_offset + delta, 0), col.max_offset(self.config.visible_cards))
        if new == col.scroll_offset:
            return [], []
        old = col.scroll_offset
        col.scroll_offset = new
        return (
            [ColumnScrolled(sid=sid, side=side, index=idx, old=old, new=new)],
            [{"op": "column", "side": side, "index": idx, "value": col.to_dict()}],
        )

    def _gesture_resize(self, sid: str, factor: float) -> Tuple[Events, Changes]:
        selected = self._selected_cards(sid)
        if not selected:
            raise NoSelection("resize needs a selected card")
        events: Events = []
        changes: Changes = []
        touched = []
        for card, surface in selected:
            card.scale = card.clamped(card.scale * factor)
            touched.append(surface)
        for surface in dict.fromkeys(touched):
            self._emit_surface_change(surface, sid, changes)
        return events, changes

    def _gesture_double_tap(self, sid: str) -> Tuple[Events, Changes]:
        selected = self._selected_cards(sid)
        if not selected:
            raise NoSelection("double-tap resize needs a selected card")
        changes: Changes = []
        touched = []
        for card, surface in selected:
            card.scale = 1.0 if card.scale == self.config.double_tap_scale else self.config.double_tap_scale
            touched.append(surface)
        for surface in dict.fromkeys(touched):
            self._emit_surface_change(surface, sid, changes)
        return [], changes

    def _gesture_long_tap(self, sid: str) -> Tuple[Events, Changes]:
        cur = self.cursors.get(sid)
        if cur is None:
            raise NoSurface()
        if cur.surface != ("shared",):
            return [], []
        held = self.drag.get(sid)
        if held:
            self.drag[sid] = None
            item = self.placed[held]
            return (
                [DragChanged(sid=sid, image_id=held, started=False,
                             u=item.u, v=item.v, tags=tuple(sorted(item.card.tags)))],
                [{"op": "drag", "sid": sid, "value": None}],
            )
        target = self._placed_under(cur.u, cur.v)
        if target is None:
            return [], []
        if target in (img for img in self.drag.values() if img):
            return [], []  # held by someone else
        self.drag[sid] = target
        item = self.placed[target]
        return (
            [DragChanged(sid=sid, image_id=target, started=True,
                         u=item.u, v=item.v, tags=tuple(sorted(item.card.tags)))],
            [{"op": "drag", "sid": sid, "value": target}],
        )

    def _placed_under(self, u: int, v: int) -> Optional[str]:
        for image_id in reversed(list(self.placed)):
            item = self.placed[image_id]
            hw = self.config.card_w_px * item.card.scale / 2
            hh = self.config.card_h_px * item.card.scale / 2
            if abs(u - item.u) <= hw and abs(v - item.v) <= hh:
                return image_id
        return None

    # --- placement and voice -------------------------------------------------

    def place_on_shared(self, sid: str, image_id: str) -> Tuple[Events, Changes]:
        cards = self.personal_front.get(sid, [])
        card = next((c for c in cards if c.image_id == image_id), None)
        if card is None:
            raise NotInPersonalColumn()
        cur = self.cursors.get(sid)
        if cur is None or cur.surface != ("personal",):
            raise NotInPersonalColumn("stand at your personal front column to place")
        cards.remove(card)
        card.selected_by = None
        lo, hi = self.shared_span()
        margin = self.config.card_w_px // 2 + 50
        side = self.sessions[sid]["side"]
        u = lo + margin if side == "left" else max(lo, hi - 1 - margin)
        v = self.room.px_h // 2
        self.placed[image_id] = PlacedImage(card=card, u=u, v=v)
        events: Events = [
            PlacedOnShared(sid=sid, image_id=image_id, u=u, v=v, tags=tuple(sorted(card.tags)))
        ]
        changes: Changes = [
            {"op": "personal", "sid": sid, "value": [card_to_dict(c) for c in cards]},
            {"op": "placed", "image_id": image_id, "value": self.placed[image_id].to_dict()},
        ]
        return events, changes

    def apply_voice(self, sid: str, transcript: str, provider: ContentProvider) -> Tuple[Events, Changes]:
        highlight = self.highlights.get(sid)
        if highlight is None:
            raise NotOnColumn()
        side, idx = highlight
        # Parse before touching anything: an unparseable utterance must leave
        # the columns as they were (the hub adds the on-screen error prompt).
        query = parse_query(transcript, limit=self.config.visible_cards * 3)
        cards = provider.fetch(query)
        col = self.columns[(side, idx)]
        col.cards = list(cards)
        col.scroll_offset = 0
        col.populated_query = query.topic
        events = [ColumnPopulated(sid=sid, side=side, index=idx, query=query.topic, count=len(cards))]
        changes = [
            {"op": "column", "side": side, "index": idx, "value": col.to_dict()},
            self._meta_change(),
        ]
        if not cards:
            ev2, ch2 = self.show_error_prompt(sid, f'No results for "{query.topic}".')
            events.extend(ev2)
            changes.extend(ch2)
        return events, changes

    # --- snapshotting -----------------------------------------------------------

    def to_snapshot(self, revision: int) -> dict:
        return {
            "revision": revision,
            "sessions": {sid: dict(info) for sid, info in self.sessions.items()},
            "columns": {
                side: [self.columns[(side, i)].to_dict() for i in range(self.room.columns_per_side)]
                for side in SIDES
            },
            "front": {
                "order": list(self.front_order),
                "personal": {
                    sid: [card_to_dict(c) for c in cards]
                    for sid, cards in self.personal_front.items()
                },
                "partition": self.front_partition(),
                "shared": {
                    "texts": [dict(t) for t in self.texts],
                    "targets": [dict(t) for t in self.targets],
                    "placed": {iid: item.to_dict() for iid, item in self.placed.items()},
                    "placed_order": list(self.placed),
                    "drag": dict(self.drag),
                },
            },
            "highlights": {
                sid: (list(h) if h else None) for sid, h in self.highlights.items()
            },
            "cursors": {sid: c.to_dict() for sid, c in self.cursors.items()},
            "rings": {tid: dict(r) for tid, r in self.rings.items()},
            "prompts": {pid: dict(p) for pid, p in self.prompts.items()},
            "meta": {"next_card": self.next_card, "next_prompt": self.next_prompt},
        }

    @classmethod
    def restore(cls, snapshot: dict, room: RoomSpec,
                config: InteractionConfig = InteractionConfig()) -> "WallState":
        """Rebuild authoritative state from a snapshot dict (replay entry point)."""
        state = cls(room, config)
        for sid in snapshot["front"]["order"]:
            state.sessions[sid] = dict(snapshot["sessions"][sid])
            state.front_order.append(sid)
            state.personal_front[sid] = [
                card_from_dict(d) for d in snapshot["front"]["personal"][sid]
            ]
            state.drag[sid] = snapshot["front"]["shared"]["drag"].get(sid)
            state.highlights[sid] = None
        for side in SIDES:
            for i, col in enumerate(snapshot["columns"][side]):
                column = state.columns[(side, i)]
                column.cards = [card_from_dict(d) for d in col["cards"]]
                column.scroll_offset = col["scroll"]
                column.populated_query = col["query"]
        state.texts = [dict(t) for t in snapshot["front"]["shared"]["texts"]]
        state.targets = [dict(t) for t in snapshot["front"]["shared"]["targets"]]
        for iid in snapshot["front"]["shared"]["placed_order"]:
            item = snapshot["front"]["shared"]["placed"][iid]
            state.placed[iid] = PlacedImage(
                card=card_from_dict(item["card"]), u=item["u"], v=item["v"]
            )
        for sid, h in snapshot["highlights"].items():
            state.highlights[sid] = tuple(h) if h else None
            if h:
                state.column_locks[tuple(h)] = sid
        for sid, c in snapshot["cursors"].items():
            state.cursors[sid] = Cursor(surface=tuple(c["surface"]), u=c["u"], v=c["v"])
        state.rings = {tid: dict(r) for tid, r in snapshot["rings"].items()}
        state.prompts = {pid: dict(p) for pid, p in snapshot["prompts"].items()}
        state.next_card = snapshot["meta"]["next_card"]
        state.next_prompt = snapshot["meta"]["next_prompt"]
        return state

    def all_card_locations(self) -> Dict[str, str]:
        """image_id -> where it lives; test hook for the conservation law."""
        out: Dict[str, str] = {}
        for (side, idx), col in self.columns.items():
            for c in col.cards:
                assert c.image_id not in out, f"card {c.image_id} duplicated"
                out[c.image_id] = f"column:{side}:{idx}"
        for sid, cards in self.personal_front.items():
            for c in cards:
                assert c.image_id not in out, f"card {c.image_id} duplicated"
                out[c.image_id] = f"personal:{sid}"
        for iid in self.placed:
            assert iid not in out, f"card {iid} duplicated"
            out[iid] = "shared"
        return out


def apply_changes(snapshot: dict, changes: Sequence[dict]) -> dict:
    """Pure application of change records to a snapshot dict.

    This is the display-client contract: a snapshot plus every change
    record since equals the current snapshot, structurally.
    """
    snap = copy.deepcopy(snapshot)
    for ch in changes:
        op = ch["op"]
        if op == "session":
            snap["sessions"][ch["sid"]] = dict(ch["value"])
        elif op == "session_gone":
            snap["sessions"].pop(ch["sid"], None)
            snap["front"]["order"] = [s for s in snap["front"]["order"] if s != ch["sid"]]
            snap["front"]["personal"].pop(ch["sid"], None)
            snap["highlights"].pop(ch["sid"], None)
            snap["front"]["shared"]["drag"].pop(ch["sid"], None)
        elif op == "column":
            snap["columns"][ch["side"]][ch["index"]] = copy.deepcopy(ch["value"])
        elif op == "personal":
            if ch["sid"] not in snap["front"]["order"]:
                snap["front"]["order"].append(ch["sid"])
            snap["front"]["personal"][ch["sid"]] = copy.deepcopy(ch["value"])
        elif op == "partition":
            snap["front"]["partition"] = copy.deepcopy(ch["value"])
        elif op == "highlight":
            snap["highlights"][ch["sid"]] = list(ch["value"]) if ch["value"] else None
        elif op == "cursor":
            snap["cursors"][ch["sid"]] = copy.deepcopy(ch["value"])
        elif op == "cursor_gone":
            snap["cursors"].pop(ch["sid"], None)
        elif op == "ring":
            snap["rings"][ch["track"]] = dict(ch["value"])
        elif op == "ring_gone":
            snap["rings"].pop(ch["track"], None)
        elif op == "placed":
            shared = snap["front"]["shared"]
            if ch["image_id"] not in shared["placed"]:
                shared["placed_order"].append(ch["image_id"])
            shared["placed"][ch["image_id"]] = copy.deepcopy(ch["value"])
        elif op == "placed_gone":
            shared = snap["front"]["shared"]
            shared["placed"].pop(ch["image_id"], None)
            shared["placed_order"] = [i for i in shared["placed_order"] if i != ch["image_id"]]
        elif op == "drag":
            snap["front"]["shared"]["drag"][ch["sid"]] = ch["value"]
        elif op == "texts":
            snap["front"]["shared"]["texts"] = copy.deepcopy(ch["value"])
        elif op == "targets":
            snap["front"]["shared"]["targets"] = copy.deepcopy(ch["value"])
        elif op == "prompt":
            snap["prompts"][ch["pid"]] = dict(ch["value"])
        elif op == "prompt_gone":
            snap["prompts"].pop(ch["pid"], None)
        elif op == "meta":
            snap["meta"] = dict(ch["value"])
        else:
            raise ValueError(f"unknown change op {op!r}")
    return snap
