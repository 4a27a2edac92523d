"""Deterministic headless driver: scripted agents against the real hub.

Agents replace everything human or hardware: bodies walking the floor
(tracker frames), thumbs on phone pads (gesture envelopes), and spoken
requests (voice envelopes). A binary-heap scheduler with a simulated
millisecond clock makes runs bit-reproducible per seed; the realtime mode
drives the identical code through wall-clock delays for live demos.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .corpus import CorpusEntry, CorpusManifest, load_manifest
from .eventlog import (
    LINE_CTL,
    LINE_ENV,
    LINE_FINAL,
    LINE_HEADER,
    EventLog,
    LogCorrupt,
    read_log,
)
from .geometry import RoomSpec
from .hub import Hub, ROLE_PAD, ROLE_TRACKER, ROLE_VOICE
from .messages import Envelope, KIND_GESTURE, KIND_TRACKS, KIND_VOICE, canonical_json
from .sessions import RegistryConfig
from .state import InteractionConfig, WallState
from .tasks import (
    GameMode,
    GamePhase,
    GameRunner,
    RecipeGame,
    RecipeSpec,
    TaskKind,
    TaskRunner,
    build_report,
    write_report,
)


class ConfigError(Exception):
    pass


class ScenarioTimeout(Exception):
    pass


class ReplayDivergence(Exception):
    pass


# --- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class AgentParams:
    walk_speed: float = 1.2       # m/s
    reaction_ms: int = 800        # latency before responding to a prompt
    think_ms: int = 100           # controller cadence
    gesture_gap_ms: int = 150     # min spacing between inputs


@dataclass(frozen=True)
class AgentScript:
    """A fully scripted participant: a dwell path plus timed inputs.

    Actions fire once their time comes and the walk has caught up:
    ``{"at": ms, "gesture": {...}}``, ``{"at": ms, "utterance": "..."}``,
    ``{"at": ms, "place": true}`` (select the first personal-front card and
    swipe it to the shared screen), ``{"at": ms, "drag_to": [u, v]}``
    (grab under the cursor, drag, release).
    """

    agent_id: str
    side: str
    waypoints: Tuple[Tuple[Tuple[float, float], int], ...] = ()  # ((x, y), dwell_ms)
    actions: Tuple[dict, ...] = ()
    walk_speed: float = 1.2
    reaction_ms: int = 800
    think_ms: int = 100


@dataclass(frozen=True)
class Exp1Config:
    side: str = "left"
    agent: AgentParams = AgentParams()
    disconnect_at_task: Optional[int] = None  # pad drop/resume after N completions
    reconnect_after_ms: int = 1500


@dataclass(frozen=True)
class ScriptedConfig:
    """Free-form scripted agents with no experiment engine attached."""

    agents: Tuple[AgentScript, ...]
    drain_ms: int = 1000  # extra simulated time after the last action


@dataclass(frozen=True)
class Exp2Config:
    mode: GameMode = GameMode.PRE_POPULATED
    agents: Tuple[AgentParams, AgentParams] = (AgentParams(), AgentParams())
    recipes: Optional[Tuple[RecipeSpec, RecipeSpec]] = None


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    experiment: object  # Exp1Config | Exp2Config
    corpus_dir: Optional[Path] = None
    room: RoomSpec = RoomSpec()
    tracker_hz: int = 30
    clock: str = "simulated"  # or "realtime"
    timeout_ms: int = 600_000
    noise_sigma_m: float = 0.0
    interaction: InteractionConfig = InteractionConfig()
    registry: RegistryConfig = RegistryConfig()


def load_scenario_file(path: Path | str) -> ScenarioConfig:
    """Parse a scenario JSON file into a config; schema mirrors ScenarioConfig."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}") from e
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    try:
        exp_raw = raw["experiment"]
        kind = exp_raw["kind"]
        if kind == "exp1":
            experiment: object = Exp1Config(
                side=exp_raw.get("side", "left"),
                agent=AgentParams(**exp_raw.get("agent", {})),
                disconnect_at_task=exp_raw.get("disconnect_at_task"),
                reconnect_after_ms=exp_raw.get("reconnect_after_ms", 1500),
            )
        elif kind == "scripted":
            experiment = ScriptedConfig(
                agents=tuple(
                    AgentScript(
                        agent_id=a["agent_id"],
                        side=a["side"],
                        waypoints=tuple(
                            (tuple(point), int(dwell)) for point, dwell in a.get("waypoints", [])
                        ),
                        actions=tuple(a.get("actions", [])),
                        walk_speed=float(a.get("walk_speed", 1.2)),
                        reaction_ms=int(a.get("reaction_ms", 800)),
                    )
                    for a in exp_raw["agents"]
                ),
                drain_ms=int(exp_raw.get("drain_ms", 1000)),
            )
        elif kind == "exp2":
            recipes = None
            if "recipes" in exp_raw:
                recipes = tuple(
                    RecipeSpec(
                        block_id=r["block_id"],
                        title=r["title"],
                        body=r["body"],
                        answer_tags=frozenset(r["answer_tags"]),
                        target_rect=tuple(r["target_rect"]),
                    )
                    for r in exp_raw["recipes"]
                )
            experiment = Exp2Config(
                mode=GameMode(exp_raw.get("mode", "pre_populated")),
                agents=tuple(
                    AgentParams(**a) for a in exp_raw.get(
                        "agents", [{}, {}]
                    )
                ),
                recipes=recipes,
            )
        else:
            raise ConfigError(f"unknown experiment kind {kind!r}")
        room = RoomSpec(**raw.get("room", {}))
        return ScenarioConfig(
            seed=int(raw["seed"]),
            experiment=experiment,
            corpus_dir=Path(raw["corpus"]) if raw.get("corpus") else None,
            room=room,
            tracker_hz=int(raw.get("tracker_hz", 30)),
            clock=raw.get("clock", "simulated"),
            timeout_ms=int(raw.get("timeout_ms", 600_000)),
            noise_sigma_m=float(raw.get("noise_sigma_m", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad scenario config: {e}") from e


# --- scheduler -----------------------------------------------------------------

class Scheduler:
    """Deterministic discrete-event loop over integer millisecond time."""

    def __init__(self, realtime: bool = False) -> None:
        self.now = 0
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._tie = itertools.count()
        self._realtime = realtime
        self._t0 = time.monotonic()

    def call_at(self, when: int, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (max(when, self.now), next(self._tie), fn))

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> None:
        self.call_at(self.now + delay_ms, fn)

    def run(self, until: Callable[[], bool], deadline_ms: int) -> bool:
        """Drain events until ``until()`` or the simulated deadline; True if done."""
        while self._heap:
            when, _, fn = heapq.heappop(self._heap)
            if when > deadline_ms:
                self.now = deadline_ms
                return False
            if self._realtime:
                lag = (self._t0 + when / 1000.0) - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
            self.now = when
            fn()
            if until():
                return True
        return until()


# --- agent plumbing ---------------------------------------------------------------

class Body:
    """A walking participant; positions interpolate at the tracker rate."""

    def __init__(self, pos: Tuple[float, float], speed: float) -> None:
        self.x, self.y = pos
        self.speed = speed
        self.target: Optional[Tuple[float, float]] = None

    def walk_to(self, target: Tuple[float, float]) -> None:
        self.target = target

    @property
    def arrived(self) -> bool:
        return self.target is None

    def step(self, dt_ms: int) -> None:
        if self.target is None:
            return
        tx, ty = self.target
        dx, dy = tx - self.x, ty - self.y
        dist = math.hypot(dx, dy)
        reach = self.speed * dt_ms / 1000.0
        if dist <= reach or dist == 0.0:
            self.x, self.y = tx, ty
            self.target = None
        else:
            self.x += dx / dist * reach
            self.y += dy / dist * reach


class PadClient:
    """An agent's protocol endpoints: pad + voice feed for one session."""

    def __init__(self, hub: Hub, side: str, now: int) -> None:
        self.hub = hub
        session, ok, _ = hub.register_pad(f"side={side}", now)
        self.session = session
        self.sid = session.session_id
        self.epoch = session.epoch
        self.connected = True
        self._gesture_seq = 0
        self._voice_seq = 0

    def disconnect(self, now: int) -> None:
        self.hub.disconnect_pad(self.sid, now)
        self.connected = False

    def resume(self, now: int) -> None:
        session, ok, _ = self.hub.resume_pad(self.session.resume_token, now)
        self.epoch = session.epoch
        self.connected = True

    def send_gesture(self, now: int, gesture: str, **fields):
        if not self.connected:
            return None
        self._gesture_seq += 1
        env = Envelope(
            kind=KIND_GESTURE,
            seq=self._gesture_seq,
            sid=self.sid,
            ts=now,
            body={"gesture": gesture, **fields},
        )
        return self.hub.dispatch(env, role=ROLE_PAD, epoch=self.epoch, now=now)

    def send_voice(self, now: int, transcript: str):
        if not self.connected:
            return None
        self._voice_seq += 1
        env = Envelope(
            kind=KIND_VOICE,
            seq=self._voice_seq,
            sid=self.sid,
            ts=now,
            body={"transcript": transcript},
        )
        return self.hub.dispatch(env, role=ROLE_VOICE, epoch=self.epoch, now=now)


def column_floor_point(room: RoomSpec, side: str, index: int,
                       clearance: float = 0.75) -> Tuple[float, float]:
    """Floor position that projects onto the center of a side column.

    Near the room corners the perpendicular wall would win the projection,
    so the stand-off distance shrinks until the side wall is strictly
    nearest.
    """
    cw = room.depth_m / room.columns_per_side
    t = (index + 0.5) * cw
    corner_gap = min(t, room.depth_m - t)
    c = min(clearance, max(0.2, corner_gap - 0.15))
    if side == "right":
        return (room.width_m - c, t)
    return (c, room.depth_m - t)


def front_floor_point(room: RoomSpec, u_px: int, clearance: float = 0.6) -> Tuple[float, float]:
    """Floor position projecting onto the front wall near pixel column ``u_px``."""
    x = u_px * room.perimeter_m() / room.px_w
    x = min(max(x, clearance + 0.05), room.width_m - clearance - 0.05)
    return (x, clearance)


def _slot_center_v(room: RoomSpec, config: InteractionConfig, slot: int) -> int:
    h = room.px_h // config.visible_cards
    return slot * h + h // 2


class ScriptedAgent:
    """Walks an explicit waypoint list and fires its timed actions in order."""

    def __init__(self, hub: Hub, pad: PadClient, body: Body, script: AgentScript) -> None:
        self.hub = hub
        self.pad = pad
        self.body = body
        self.script = script
        self.params = AgentParams(
            walk_speed=script.walk_speed,
            reaction_ms=script.reaction_ms,
            think_ms=script.think_ms,
        )
        self._leg = 0
        self._dwell_until: Optional[int] = None
        self._next_action = 0
        self.done = False

    def _advance_walk(self, now: int) -> None:
        if self._leg >= len(self.script.waypoints):
            return
        target, dwell = self.script.waypoints[self._leg]
        if self.body.target != tuple(target) and (self.body.x, self.body.y) != tuple(target):
            self.body.walk_to(tuple(target))
            return
        if not self.body.arrived:
            return
        if self._dwell_until is None:
            self._dwell_until = now + dwell
        elif now >= self._dwell_until:
            self._leg += 1
            self._dwell_until = None

    def _fire(self, action: dict, now: int) -> None:
        if "gesture" in action:
            self.pad.send_gesture(now, **action["gesture"])
        elif "utterance" in action:
            self.pad.send_voice(now, action["utterance"])
        elif "place" in action:
            self._do_place(now)
        elif "drag_to" in action:
            self._do_drag(now, tuple(action["drag_to"]))

    def _do_place(self, now: int) -> None:
        state = self.hub.state
        cards = state.personal_front.get(self.pad.sid, [])
        cursor = state.cursors.get(self.pad.sid)
        if not cards or cursor is None or cursor.surface != ("personal",):
            return
        slot_v = self.hub.room.px_h // (2 * state.config.visible_cards)
        dy = (slot_v - cursor.v) / state.config.pad_gain_v
        self.pad.send_gesture(now, "move", dx=0.0, dy=max(-1.0, min(1.0, dy)))
        if cards[0].selected_by != self.pad.sid:
            self.pad.send_gesture(now, "tap")
        self.pad.send_gesture(now, "swipe_right")

    def _burst_move(self, u: int, v: int, now: int) -> None:
        state = self.hub.state
        for _ in range(10):
            cursor = state.cursors[self.pad.sid]
            if (cursor.u, cursor.v) == (u, v):
                return
            dx = (u - cursor.u) / state.config.pad_gain_u
            dy = (v - cursor.v) / state.config.pad_gain_v
            self.pad.send_gesture(
                now, "move", dx=max(-1.0, min(1.0, dx)), dy=max(-1.0, min(1.0, dy))
            )

    def _do_drag(self, now: int, goal: Tuple[int, int]) -> None:
        state = self.hub.state
        cursor = state.cursors.get(self.pad.sid)
        if cursor is None or cursor.surface != ("shared",):
            return
        if state.drag.get(self.pad.sid) is None:
            if not state.placed:
                return
            newest = next(reversed(state.placed))
            item = state.placed[newest]
            self._burst_move(item.u, item.v, now)
            self.pad.send_gesture(now, "long_tap")
            if state.drag.get(self.pad.sid) is None:
                return
        self._burst_move(goal[0], goal[1], now)
        self.pad.send_gesture(now, "long_tap")

    def step(self, now: int) -> None:
        self._advance_walk(now)
        # actions wait for the walk to catch up: inputs from a moving body
        # would land on whatever zone it happened to cross
        while (
            self.body.arrived
            and self._next_action < len(self.script.actions)
            and now >= self.script.actions[self._next_action].get("at", 0)
        ):
            self._fire(self.script.actions[self._next_action], now)
            self._next_action += 1
        self.done = (
            self._next_action >= len(self.script.actions)
            and self._leg >= len(self.script.waypoints)
        )


class Exp1Agent:
    """Follows on-screen prompts: walk, scroll, select, swipe, speak."""

    def __init__(self, hub: Hub, pad: PadClient, runner: TaskRunner,
                 body: Body, params: AgentParams) -> None:
        self.hub = hub
        self.pad = pad
        self.runner = runner
        self.body = body
        self.params = params
        self._task_seen_at: Dict[str, int] = {}
        self._last_input_at = -10_000

    def step(self, now: int) -> None:
        if not self.pad.connected:
            return
        prompt = self.runner.current
        if prompt is None:
            # No prompt yet: approach the middle of our wall so the tracker
            # can bind us; prompts only start flowing once we are bound.
            if (
                self.hub.state.highlights.get(self.pad.sid) is None
                and self.body.arrived
                and not self.runner.finished
                and not self.runner.timings
            ):
                mid = self.hub.room.columns_per_side // 2
                self.body.walk_to(column_floor_point(self.hub.room, self.runner.side, mid))
            return
        seen = self._task_seen_at.setdefault(prompt.task_id, now)
        if now - seen < self.params.reaction_ms:
            return
        side, index = prompt.target
        state = self.hub.state
        if state.highlights.get(self.pad.sid) != (side, index):
            target = column_floor_point(self.hub.room, side, index)
            if self.body.target != target:
                self.body.walk_to(target)
            return
        if prompt.kind is TaskKind.SPATIAL_SELECT:
            return  # arriving was the task
        if now - self._last_input_at < self.params.gesture_gap_ms:
            return
        self._last_input_at = now
        self._act(prompt, side, index, now)

    def _act(self, prompt, side: str, index: int, now: int) -> None:
        state = self.hub.state
        col = state.columns[(side, index)]
        if prompt.kind is TaskKind.SCROLL_COLUMN:
            if col.scroll_offset < col.max_offset(state.config.visible_cards):
                self.pad.send_gesture(now, "swipe_up")
            else:
                self.pad.send_gesture(now, "swipe_down")
            return
        if prompt.kind is TaskKind.VOICE_POPULATE:
            self.pad.send_voice(now, f"show me pictures of {prompt.topic}")
            return
        if prompt.kind is TaskKind.MOVE_TO_FRONT:
            if any(c.selected_by == self.pad.sid for c in col.cards):
                self.pad.send_gesture(now, "swipe_right")
                return
            self._select_step(col, now, prefer_unselected=True)
            return
        if prompt.kind is TaskKind.SELECT_IMAGE:
            self._select_step(col, now, prefer_unselected=True)
            return

    def _select_step(self, col, now: int, prefer_unselected: bool) -> None:
        state = self.hub.state
        visible = col.cards[col.scroll_offset:col.scroll_offset + state.config.visible_cards]
        if not visible:
            return  # nothing here; the column may have been emptied by voice
        slot = 0
        for i, card in enumerate(visible):
            if not prefer_unselected or card.selected_by is None:
                slot = i
                break
        cursor = state.cursors.get(self.pad.sid)
        target_v = _slot_center_v(self.hub.room, state.config, slot)
        if cursor is None:
            return
        h = self.hub.room.px_h // state.config.visible_cards
        if cursor.v // h != slot:
            dy = (target_v - cursor.v) / state.config.pad_gain_v
            self.pad.send_gesture(now, "move", dx=0.0, dy=max(-1.0, min(1.0, dy)))
            return
        self.pad.send_gesture(now, "tap")


class Exp2Agent:
    """Plays one side of the recipe game end to end."""

    def __init__(self, hub: Hub, pad: PadClient, game: RecipeGame,
                 body: Body, params: AgentParams, mode: GameMode) -> None:
        self.hub = hub
        self.pad = pad
        self.game = game
        self.body = body
        self.params = params
        self.mode = mode
        self.side = pad.session.side.value
        self.recipe = game.recipe_for(pad.sid)
        self.staged_id: Optional[str] = None
        self.placed_id: Optional[str] = None
        self._last_input_at = -10_000
        self._started_at: Optional[int] = None

    def _throttled(self, now: int) -> bool:
        if now - self._last_input_at < self.params.gesture_gap_ms:
            return True
        self._last_input_at = now
        return False

    def _answer_card_in(self, cards) -> Optional[int]:
        for i, card in enumerate(cards):
            if set(card.tags) & set(self.recipe.answer_tags):
                return i
        return None

    def step(self, now: int) -> None:
        if not self.pad.connected:
            return
        if self._started_at is None:
            self._started_at = now
        if now - self._started_at < self.params.reaction_ms:
            return
        phase = self.game.phases.get(self.pad.sid, GamePhase.SEARCHING)
        if phase is GamePhase.DONE:
            return
        state = self.hub.state
        if self.staged_id is None:
            self._search_step(state, now)
        elif self.placed_id is None:
            self._front_step(state, now)
        else:
            self._drag_step(state, now)

    # find an answer image in a side column (speaking one up if needed)
    def _search_step(self, state: WallState, now: int) -> None:
        target_col = None
        card_index = None
        for i in range(self.hub.room.columns_per_side):
            col = state.columns[(self.side, i)]
            idx = self._answer_card_in(col.cards)
            if idx is not None:
                target_col, card_index = i, idx
                break
        if target_col is None:
            # voice-required round: ask for the key ingredient at any column
            mid = self.hub.room.columns_per_side // 2
            if state.highlights.get(self.pad.sid) != (self.side, mid):
                target = column_floor_point(self.hub.room, self.side, mid)
                if self.body.target != target:
                    self.body.walk_to(target)
                return
            if self._throttled(now):
                return
            topic = sorted(self.recipe.answer_tags)[0]
            self.pad.send_voice(now, f"show me pictures of {topic}")
            return
        if state.highlights.get(self.pad.sid) != (self.side, target_col):
            target = column_floor_point(self.hub.room, self.side, target_col)
            if self.body.target != target:
                self.body.walk_to(target)
            return
        if self._throttled(now):
            return
        col = state.columns[(self.side, target_col)]
        visible = state.config.visible_cards
        if not (col.scroll_offset <= card_index < col.scroll_offset + visible):
            self.pad.send_gesture(
                now, "swipe_up" if card_index >= col.scroll_offset + visible else "swipe_down"
            )
            return
        slot = card_index - col.scroll_offset
        cursor = state.cursors.get(self.pad.sid)
        h = self.hub.room.px_h // visible
        if cursor is None:
            return
        if cursor.v // h != slot:
            dy = (_slot_center_v(self.hub.room, state.config, slot) - cursor.v) / state.config.pad_gain_v
            self.pad.send_gesture(now, "move", dx=0.0, dy=max(-1.0, min(1.0, dy)))
            return
        card = col.cards[card_index]
        if card.selected_by != self.pad.sid:
            self.pad.send_gesture(now, "tap")
            return
        self.staged_id = card.image_id
        self.pad.send_gesture(now, "swipe_right")

    # stand at the personal front column and place the candidate
    def _front_step(self, state: WallState, now: int) -> None:
        if self.staged_id in state.placed:
            self.placed_id = self.staged_id
            return
        cards = state.personal_front.get(self.pad.sid, [])
        idx = next((i for i, c in enumerate(cards) if c.image_id == self.staged_id), None)
        if idx is None:
            self.staged_id = None  # lost it somehow; search again
            return
        cursor = state.cursors.get(self.pad.sid)
        if cursor is None or cursor.surface != ("personal",):
            span = state.front_partition()["personal"][self.pad.sid]
            target = front_floor_point(self.hub.room, (span[0] + span[1]) // 2)
            if self.body.target != target:
                self.body.walk_to(target)
            return
        if self._throttled(now):
            return
        visible = state.config.visible_cards
        h = self.hub.room.px_h // visible
        slot = min(idx, visible - 1)
        if cursor.v // h != slot:
            dy = (_slot_center_v(self.hub.room, state.config, slot) - cursor.v) / state.config.pad_gain_v
            self.pad.send_gesture(now, "move", dx=0.0, dy=max(-1.0, min(1.0, dy)))
            return
        card = cards[idx]
        if card.selected_by != self.pad.sid:
            self.pad.send_gesture(now, "tap")
            return
        self.pad.send_gesture(now, "swipe_right")

    # grab the placed image and drag it into the recipe's target box
    def _drag_step(self, state: WallState, now: int) -> None:
        if self.placed_id not in state.placed:
            self.placed_id = None
            return
        item = state.placed[self.placed_id]
        rect = self.recipe.target_rect
        goal = ((rect[0] + rect[2]) // 2, (rect[1] + rect[3]) // 2)
        cursor = state.cursors.get(self.pad.sid)
        if cursor is None or cursor.surface != ("shared",):
            target = front_floor_point(self.hub.room, goal[0])
            if self.body.target != target:
                self.body.walk_to(target)
            return
        if self._throttled(now):
            return
        holding = state.drag.get(self.pad.sid) == self.placed_id
        if not holding:
            if (cursor.u, cursor.v) != (item.u, item.v):
                self._move_toward(state, cursor, item.u, item.v, now)
                return
            self.pad.send_gesture(now, "long_tap")
            return
        if (cursor.u, cursor.v) != goal:
            self._move_toward(state, cursor, goal[0], goal[1], now)
            return
        self.pad.send_gesture(now, "long_tap")  # release inside the target

    def _move_toward(self, state: WallState, cursor, u: int, v: int, now: int) -> None:
        dx = (u - cursor.u) / state.config.pad_gain_u
        dy = (v - cursor.v) / state.config.pad_gain_v
        self.pad.send_gesture(
            now,
            "move",
            dx=max(-1.0, min(1.0, dx)),
            dy=max(-1.0, min(1.0, dy)),
        )


# --- recipes and layout ------------------------------------------------------------

DEFAULT_RECIPES: Tuple[RecipeSpec, RecipeSpec] = (
    RecipeSpec(
        block_id="recipe-a",
        title="Guacamole",
        body="Mash the ripe avocados with lime, onion and salt.",
        answer_tags=frozenset({"avocado"}),
        target_rect=(0, 0, 0, 0),  # filled in per room at setup
    ),
    RecipeSpec(
        block_id="recipe-b",
        title="Tomato Bruschetta",
        body="Top toasted bread with chopped tomatoes and basil.",
        answer_tags=frozenset({"tomato"}),
        target_rect=(0, 0, 0, 0),
    ),
)


def game_layout(room: RoomSpec, recipes: Tuple[RecipeSpec, RecipeSpec],
                shared_span: Tuple[int, int]) -> Tuple[List[dict], List[dict], Tuple[RecipeSpec, RecipeSpec]]:
    """Texts left/right of center, target boxes beside them, inside shared."""
    lo, hi = shared_span
    width = hi - lo
    quarter = width // 4
    v0, v1 = room.px_h // 4, room.px_h // 4 + 300
    placedw = 320
    texts, targets, sized = [], [], []
    for i, recipe in enumerate(recipes):
        cx = lo + quarter * (1 + 2 * i)
        text_rect = [cx - 380, v0, cx - 60, v1]
        target_rect = (cx + 40, v0, cx + 40 + placedw, v0 + placedw)
        texts.append(
            {"id": recipe.block_id, "rect": text_rect, "title": recipe.title, "body": recipe.body}
        )
        targets.append({"id": recipe.block_id, "rect": list(target_rect)})
        sized.append(
            RecipeSpec(
                block_id=recipe.block_id,
                title=recipe.title,
                body=recipe.body,
                answer_tags=recipe.answer_tags,
                target_rect=target_rect,
            )
        )
    return texts, targets, (sized[0], sized[1])


# --- the scenario runner -------------------------------------------------------------

@dataclass
class ScenarioResult:
    exit_code: int
    log: EventLog
    report: object
    final_snapshot: dict
    completed: bool
    sim_ms: int
    out_dir: Optional[Path] = None


def _deterministic_ids(seed: int):
    rng = random.Random(f"{seed}:ids")
    counter = itertools.count(1)

    def factory() -> Tuple[str, str]:
        n = next(counter)
        return f"pad{n}", f"resume-{n}-{rng.getrandbits(32):08x}"

    return factory


def _load_corpus(config: ScenarioConfig) -> CorpusManifest:
    if config.corpus_dir is None:
        raise ConfigError("scenario needs a corpus directory")
    return load_manifest(config.corpus_dir)


def run_scenario(
    config: ScenarioConfig,
    out_dir: Optional[Path | str] = None,
    manifest: Optional[CorpusManifest] = None,
    raise_on_timeout: bool = False,
) -> ScenarioResult:
    """Run one experiment headless; logs, metrics and exit status out."""
    manifest = manifest if manifest is not None else _load_corpus(config)
    log = EventLog()
    hub = Hub(
        config.room,
        manifest,
        seed=config.seed,
        interaction=config.interaction,
        registry_config=config.registry,
        id_factory=_deterministic_ids(config.seed),
        log=log,
    )
    scheduler = Scheduler(realtime=(config.clock == "realtime"))
    rng = random.Random(f"{config.seed}:noise")

    if isinstance(config.experiment, Exp1Config):
        runners, agents, done = _setup_exp1(hub, config, log)
    elif isinstance(config.experiment, Exp2Config):
        runners, agents, done = _setup_exp2(hub, config, log)
    elif isinstance(config.experiment, ScriptedConfig):
        runners, agents, done = _setup_scripted(hub, config, log)
    else:
        raise ConfigError(f"unsupported experiment {config.experiment!r}")

    header = {
        "line": LINE_HEADER,
        "config": {
            "seed": config.seed,
            "room": {
                "width_m": config.room.width_m,
                "depth_m": config.room.depth_m,
                "screen_height_m": config.room.screen_height_m,
                "px_w": config.room.px_w,
                "px_h": config.room.px_h,
                "active_enter_m": config.room.active_enter_m,
                "active_exit_m": config.room.active_exit_m,
                "columns_per_side": config.room.columns_per_side,
            },
            "tracker_hz": config.tracker_hz,
            "timeout_ms": config.timeout_ms,
            "noise_sigma_m": config.noise_sigma_m,
        },
        "manifest": [
            {"path": e.path, "tags": sorted(e.tags)} for e in manifest.entries
        ],
        "snapshot": hub.initial_snapshot(),
    }
    log.records.insert(0, header)

    # lifecycle setup happens at t=0, before the first tracker frame
    for setup in runners["setup"]:
        setup(scheduler)

    tracker_epoch = hub.connect_client("tracker", 0)
    tracker_seq = itertools.count(1)
    interval = 1000.0 / config.tracker_hz
    bodies: Dict[str, Body] = runners["bodies"]
    last_tick = {"t": 0}

    def tracker_tick(i: int) -> None:
        now = scheduler.now
        dt = now - last_tick["t"]
        last_tick["t"] = now
        entries = []
        for track_id, body in bodies.items():
            body.step(dt)
            x, y = body.x, body.y
            if config.noise_sigma_m > 0:
                x += rng.gauss(0.0, config.noise_sigma_m)
                y += rng.gauss(0.0, config.noise_sigma_m)
            entries.append({"id": track_id, "x": x, "y": y})
        env = Envelope(
            kind=KIND_TRACKS,
            seq=next(tracker_seq),
            sid="tracker",
            ts=now,
            body={"tracks": entries},
        )
        hub.dispatch(env, role=ROLE_TRACKER, epoch=tracker_epoch, now=now)
        scheduler.call_at(int(round((i + 1) * interval)), lambda: tracker_tick(i + 1))

    scheduler.call_at(0, lambda: tracker_tick(0))

    def make_think(agent) -> Callable[[], None]:
        def think() -> None:
            agent.step(scheduler.now)
            scheduler.call_later(agent.params.think_ms, think)
        return think

    for agent in agents:
        scheduler.call_later(agent.params.think_ms, make_think(agent))

    completed = scheduler.run(done, deadline_ms=config.timeout_ms)
    if not completed:
        for abandon in runners["abandon"]:
            abandon(scheduler.now)
        if raise_on_timeout:
            raise ScenarioTimeout(f"scenario not complete after {config.timeout_ms} ms")

    report = build_report(runners["timings"](), games=runners["games"]())
    final = {
        "line": LINE_FINAL,
        "ts": scheduler.now,
        "exit": 0 if completed else 1,
        "skipped_entries": hub.registry.skipped_entries,
        "snapshot": hub.state.to_snapshot(hub.revision),
    }
    log.append(final)

    result = ScenarioResult(
        exit_code=0 if completed else 1,
        log=log,
        report=report,
        final_snapshot=final["snapshot"],
        completed=completed,
        sim_ms=scheduler.now,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        log.dump(out / "events.jsonl")
        write_report(report, out)
        result.out_dir = out
    return result


def _setup_exp1(hub: Hub, config: ScenarioConfig, log: EventLog):
    exp: Exp1Config = config.experiment
    hub.boot_fill_columns()
    topics = sorted({t for e in hub.provider.manifest.entries for t in e.tags})

    state: Dict[str, object] = {}

    def setup(scheduler: Scheduler) -> None:
        pad = PadClient(hub, exp.side, scheduler.now)
        runner = TaskRunner(
            hub, pad.sid, exp.side, config.seed, topics, log=log
        )
        body = Body(pos=(config.room.width_m / 2, config.room.depth_m / 2),
                    speed=exp.agent.walk_speed)
        agent = Exp1Agent(hub, pad, runner, body, exp.agent)
        state["pad"], state["runner"], state["agent"] = pad, runner, agent
        bodies[f"body-{pad.sid}"] = body
        agents.append(agent)

        def maybe_issue() -> None:
            session = hub.registry.sessions.get(pad.sid)
            if runner.finished:
                return
            if runner.current is None and session and session.bound_track:
                runner.issue_next(scheduler.now)
            scheduler.call_later(100, maybe_issue)

        scheduler.call_later(100, maybe_issue)

        if exp.disconnect_at_task is not None:
            def watch_disconnect() -> None:
                runner_obj: TaskRunner = state["runner"]
                done_count = len(runner_obj.timings)
                if pad.connected and done_count >= exp.disconnect_at_task:
                    pad.disconnect(scheduler.now)
                    scheduler.call_later(
                        exp.reconnect_after_ms, lambda: pad.resume(scheduler.now)
                    )
                    return
                if pad.connected:
                    scheduler.call_later(100, watch_disconnect)

            scheduler.call_later(100, watch_disconnect)

    bodies: Dict[str, Body] = {}
    agents: List[object] = []

    def done() -> bool:
        runner: Optional[TaskRunner] = state.get("runner")
        return bool(runner and runner.finished)

    def abandon(now: int) -> None:
        runner: Optional[TaskRunner] = state.get("runner")
        if runner:
            runner.abandon_current(now)

    return (
        {
            "setup": [setup],
            "bodies": bodies,
            "timings": lambda: state["runner"].timings if "runner" in state else [],
            "games": lambda: [],
            "abandon": [abandon],
        },
        agents,
        done,
    )


def _setup_exp2(hub: Hub, config: ScenarioConfig, log: EventLog):
    exp: Exp2Config = config.experiment
    recipes = exp.recipes or DEFAULT_RECIPES
    answer_tags = frozenset().union(*(r.answer_tags for r in recipes))

    hub.boot_fill_columns(exclude_tags=tuple(answer_tags))
    if exp.mode is GameMode.PRE_POPULATED:
        inject_rng = random.Random(f"{config.seed}:inject")
        for side, recipe in (("left", recipes[0]), ("right", recipes[1])):
            entries = hub.provider.entries_tagged(recipe.answer_tags)
            if not entries:
                raise ConfigError(
                    f"corpus has no image tagged {sorted(recipe.answer_tags)}"
                )
            hub.boot_inject_card(
                side, inject_rng.randrange(config.room.columns_per_side), entries[0]
            )

    bodies: Dict[str, Body] = {}
    agents: List[object] = []
    state: Dict[str, object] = {}

    def setup(scheduler: Scheduler) -> None:
        pads = [PadClient(hub, side, scheduler.now) for side in ("left", "right")]
        texts, targets, sized = game_layout(
            config.room, recipes, hub.state.shared_span()
        )
        # Layout depends on the registered roster (the shared span sits
        # between the personal strips), so it lands as a revisioned change.
        changes = hub.state.setup_shared_layout(texts, targets)
        hub.commit(changes, scheduler.now)
        game = RecipeGame(
            game_id=f"game-{config.seed}",
            mode=exp.mode,
            recipes=sized,
            assignment={pads[0].sid: 0, pads[1].sid: 1},
        )
        game_runner = GameRunner(hub, game, log=log)
        game_runner.start(scheduler.now)
        state["game"], state["game_runner"] = game, game_runner
        for pad, params in zip(pads, exp.agents):
            body = Body(
                pos=(config.room.width_m / 2, config.room.depth_m / 2),
                speed=params.walk_speed,
            )
            bodies[f"body-{pad.sid}"] = body
            agents.append(Exp2Agent(hub, pad, game, body, params, exp.mode))

    def done() -> bool:
        game: Optional[RecipeGame] = state.get("game")
        return bool(game and game.done)

    return (
        {
            "setup": [setup],
            "bodies": bodies,
            "timings": lambda: [],
            "games": lambda: (
                [state["game_runner"].result()] if "game_runner" in state else []
            ),
            "abandon": [],
        },
        agents,
        done,
    )


def _setup_scripted(hub: Hub, config: ScenarioConfig, log: EventLog):
    exp: ScriptedConfig = config.experiment
    hub.boot_fill_columns()
    bodies: Dict[str, Body] = {}
    agents: List[ScriptedAgent] = []
    holder: Dict[str, object] = {}

    def setup(scheduler: Scheduler) -> None:
        holder["scheduler"] = scheduler
        for script in exp.agents:
            pad = PadClient(hub, script.side, scheduler.now)
            body = Body(
                pos=(config.room.width_m / 2, config.room.depth_m / 2),
                speed=script.walk_speed,
            )
            bodies[f"body-{pad.sid}"] = body
            agents.append(ScriptedAgent(hub, pad, body, script))

    def done() -> bool:
        if not agents or not all(a.done for a in agents):
            return False
        scheduler: Scheduler = holder["scheduler"]  # type: ignore[assignment]
        if "done_at" not in holder:
            holder["done_at"] = scheduler.now
        return scheduler.now >= int(holder["done_at"]) + exp.drain_ms  # type: ignore[arg-type]

    return (
        {
            "setup": [setup],
            "bodies": bodies,
            "timings": lambda: [],
            "games": lambda: [],
            "abandon": [],
        },
        agents,
        done,
    )


# --- replay ------------------------------------------------------------------------

def replay_records(records: List[dict]) -> dict:
    """Re-apply a recorded run through the hub; returns the final snapshot.

    Raises :class:`ReplayDivergence` if the rebuilt final state differs from
    the recorded one.
    """
    if not records or records[0].get("line") != LINE_HEADER:
        raise LogCorrupt("log must start with a header line", 1)
    header = records[0]
    cfg = header["config"]
    room = RoomSpec(**cfg["room"])
    manifest = CorpusManifest(
        entries=tuple(
            CorpusEntry(path=e["path"], tags=frozenset(e["tags"]))
            for e in header["manifest"]
        )
    )
    hub = Hub(room, manifest, seed=cfg["seed"])
    hub.restore_snapshot(header["snapshot"])

    final_record = None
    for line_no, record in enumerate(records[1:], start=2):
        line = record.get("line")
        if line == LINE_CTL:
            op = record["op"]
            if op == "register":
                hub.register_pad(
                    f"side={record['side']}",
                    record["ts"],
                    fixed=(record["sid"], record["resume"]),
                )
            elif op == "resume":
                session = hub.registry.sessions.get(record["sid"])
                if session is None:
                    raise ReplayDivergence(
                        f"line {line_no}: resume for unknown session {record['sid']}"
                    )
                hub.resume_pad(session.resume_token, record["ts"])
            elif op == "disconnect":
                hub.disconnect_pad(record["sid"], record["ts"])
            elif op == "connect":
                hub.connect_client(record["sid"], record["ts"])
            elif op == "apply":
                hub.apply_recorded_changes(record["changes"], record["ts"])
        elif line == LINE_ENV:
            e = record["env"]
            env = Envelope(
                v=e["v"], kind=e["kind"], seq=e["seq"], sid=e["sid"],
                ts=e["ts"], body=e["body"],
            )
            result = hub.dispatch(env, role=record["role"], epoch=record["epoch"], now=e["ts"])
            if result.applied != record["applied"] or hub.revision != record["rev"]:
                raise ReplayDivergence(
                    f"line {line_no}: outcome diverged "
                    f"(applied {result.applied} vs {record['applied']}, "
                    f"rev {hub.revision} vs {record['rev']})"
                )
        elif line == LINE_FINAL:
            final_record = record
    if final_record is None:
        raise LogCorrupt("log truncated: missing final line", len(records))
    rebuilt = hub.state.to_snapshot(hub.revision)
    if canonical_json(rebuilt) != canonical_json(final_record["snapshot"]):
        raise ReplayDivergence("final snapshot differs from the recorded run")
    return rebuilt


def replay_file(path: Path | str) -> dict:
    return replay_records(read_log(path))


def strip_volatile(snapshot: dict) -> dict:
    """Snapshot minus revision counter, for cross-run state comparison."""
    out = json.loads(canonical_json(snapshot))
    out.pop("revision", None)
    return out
