"""Experiment orchestration: prompted task sequences, the recipe game, metrics.

The first experiment prompts a single user through a randomized series of
spatial-selection, scrolling, image-selection, move-to-front and
voice-population tasks, timing each from prompt to the completing event.
The second is a two-player layout game: find an image matching your
recipe's key ingredient, stage it on your personal front column, place it
on the shared screen, and drag it onto its target once the wall confirms
it is correct.

Completion is detected purely from the hub's canonical event stream, so
the same checks run identically live, headless, and in replay.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .eventlog import LINE_GAME, LINE_TASK
from .messages import Envelope, KIND_PROMPT
from .state import (
    CardSelected,
    CardsMovedToFront,
    ColumnPopulated,
    ColumnScrolled,
    DragChanged,
    Event,
    HighlightChanged,
    PlacedOnShared,
)


class ClockSkew(Exception):
    pass


class TaskKind(Enum):
    SPATIAL_SELECT = "spatial_select"
    SCROLL_COLUMN = "scroll_column"
    SELECT_IMAGE = "select_image"
    MOVE_TO_FRONT = "move_to_front"
    VOICE_POPULATE = "voice_populate"


# Voice tasks appear less often than the four touch/movement tasks.
KIND_WEIGHTS: Tuple[Tuple[TaskKind, int], ...] = (
    (TaskKind.SPATIAL_SELECT, 2),
    (TaskKind.SCROLL_COLUMN, 2),
    (TaskKind.SELECT_IMAGE, 2),
    (TaskKind.MOVE_TO_FRONT, 2),
    (TaskKind.VOICE_POPULATE, 1),
)

TASK_COUNT_MIN = 20
TASK_COUNT_MAX = 35


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    target_index: int
    topic: Optional[str] = None


@dataclass(frozen=True)
class TaskPrompt:
    task_id: str
    sid: str
    kind: TaskKind
    target: Tuple[str, int]
    text: str
    issued_at: int
    topic: Optional[str] = None


@dataclass(frozen=True)
class TaskTiming:
    task_id: str
    kind: TaskKind
    duration_ms: int


def gen_tasks(
    seed: int,
    side: str,
    topics: Sequence[str],
    columns: int = 9,
) -> Iterator[TaskSpec]:
    """Deterministic lazy task sequence for one user.

    The total count is uniform on [20, 35]; kinds are drawn 2:2:2:2:1 with
    voice population the rare one; targets are uniform over the side's
    columns.
    """
    rng = random.Random(f"{seed}:tasks:{side}")
    weighted = [kind for kind, w in KIND_WEIGHTS for _ in range(w)]
    count = rng.randint(TASK_COUNT_MIN, TASK_COUNT_MAX)
    for _ in range(count):
        kind = rng.choice(weighted)
        target = rng.randrange(columns)
        topic = rng.choice(list(topics)) if kind is TaskKind.VOICE_POPULATE else None
        yield TaskSpec(kind=kind, target_index=target, topic=topic)


def prompt_text(kind: TaskKind, index: int, topic: Optional[str]) -> str:
    ordinal = index + 1
    if kind is TaskKind.SPATIAL_SELECT:
        return f"Walk to column {ordinal} until it is highlighted"
    if kind is TaskKind.SCROLL_COLUMN:
        return f"Scroll column {ordinal}"
    if kind is TaskKind.SELECT_IMAGE:
        return f"Select a picture in column {ordinal}"
    if kind is TaskKind.MOVE_TO_FRONT:
        return f"Select a picture from column {ordinal} and move it to the front screen"
    return f'Populate column {ordinal} with pictures of {topic}'


def check_completion(prompt: TaskPrompt, event: Event) -> bool:
    """Pure predicate: does this canonical-stream event complete the prompt?"""
    side, index = prompt.target
    if prompt.kind is TaskKind.SPATIAL_SELECT:
        return (
            isinstance(event, HighlightChanged)
            and event.sid == prompt.sid
            and event.new == (side, index)
        )
    if prompt.kind is TaskKind.SCROLL_COLUMN:
        return (
            isinstance(event, ColumnScrolled)
            and event.sid == prompt.sid
            and (event.side, event.index) == (side, index)
        )
    if prompt.kind is TaskKind.SELECT_IMAGE:
        return (
            isinstance(event, CardSelected)
            and event.sid == prompt.sid
            and event.selected
            and event.surface == ("column", side, index)
        )
    if prompt.kind is TaskKind.MOVE_TO_FRONT:
        return (
            isinstance(event, CardsMovedToFront)
            and event.sid == prompt.sid
            and (event.side, event.index) == (side, index)
        )
    if prompt.kind is TaskKind.VOICE_POPULATE:
        return (
            isinstance(event, ColumnPopulated)
            and event.sid == prompt.sid
            and (event.side, event.index) == (side, index)
            and event.query == prompt.topic
        )
    raise AssertionError(prompt.kind)


def record_timing(prompt: TaskPrompt, completion_ts: int) -> TaskTiming:
    duration = completion_ts - prompt.issued_at
    if duration < 0:
        raise ClockSkew(f"completion {completion_ts} before issue {prompt.issued_at}")
    return TaskTiming(task_id=prompt.task_id, kind=prompt.kind, duration_ms=duration)


# --- metrics -------------------------------------------------------------------

def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass
class MetricsReport:
    tasks: Dict[str, dict] = field(default_factory=dict)
    games: List[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"tasks": self.tasks, "games": self.games}

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["kind", "count", "mean_s", "median_s"])
        for kind in TaskKind:
            bucket = self.tasks.get(kind.value, {"count": 0})
            writer.writerow(
                [
                    kind.value,
                    bucket.get("count", 0),
                    bucket.get("mean_s", ""),
                    bucket.get("median_s", ""),
                ]
            )
        return out.getvalue()


def build_report(
    timings: Iterable[TaskTiming], games: Iterable[dict] = ()
) -> MetricsReport:
    """Aggregate completed-task timings; mean and lower median per kind."""
    buckets: Dict[str, List[float]] = {}
    for t in timings:
        buckets.setdefault(t.kind.value, []).append(t.duration_ms / 1000.0)
    tasks = {}
    for kind in TaskKind:
        values = buckets.get(kind.value, [])
        entry: dict = {"count": len(values)}
        if values:
            entry["mean_s"] = sum(values) / len(values)
            entry["median_s"] = lower_median(values)
        tasks[kind.value] = entry
    return MetricsReport(tasks=tasks, games=list(games))


def write_report(report: MetricsReport, out_dir: Path | str) -> Tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    json_path.write_text(
        json.dumps(report.to_json_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    return json_path, csv_path


def report_from_log(records: Iterable[dict]) -> MetricsReport:
    """One-pass recomputation of the metrics from raw JSONL records."""
    issued: Dict[str, dict] = {}
    timings: List[TaskTiming] = []
    games: Dict[str, dict] = {}
    for record in records:
        line = record.get("line")
        if line == LINE_TASK:
            if record["ev"] == "issued":
                issued[record["task_id"]] = record
            elif record["ev"] == "completed":
                start = issued.pop(record["task_id"], None)
                if start is not None:
                    timings.append(
                        TaskTiming(
                            task_id=record["task_id"],
                            kind=TaskKind(start["kind"]),
                            duration_ms=record["ts"] - start["ts"],
                        )
                    )
        elif line == LINE_GAME:
            if record["ev"] == "start":
                games[record["game_id"]] = {
                    "game_id": record["game_id"],
                    "mode": record["mode"],
                    "started": record["ts"],
                    "completed": False,
                }
            elif record["ev"] == "done" and record["game_id"] in games:
                g = games[record["game_id"]]
                g["completed"] = True
                g["duration_s"] = (record["ts"] - g.pop("started")) / 1000.0
    for g in games.values():
        g.pop("started", None)
        g.setdefault("duration_s", None)
    return build_report(timings, games=list(games.values()))


# --- experiment 1 runner ---------------------------------------------------------

class TaskRunner:
    """Issues prompts through the hub and times their completion from events."""

    def __init__(
        self,
        hub,
        sid: str,
        side: str,
        seed: int,
        topics: Sequence[str],
        log=None,
    ) -> None:
        self.hub = hub
        self.sid = sid
        self.side = side
        self.log = log
        self._tasks = gen_tasks(seed, side, topics, columns=hub.room.columns_per_side)
        self._seq = 0
        self._counter = 0
        self._epoch = hub.connect_client("task-engine", 0)
        self.current: Optional[TaskPrompt] = None
        self.timings: List[TaskTiming] = []
        self.abandoned: List[str] = []
        self.finished = False
        hub.listeners.append(self.on_events)

    def _send_prompt(self, body: dict, now: int) -> None:
        self._seq += 1
        env = Envelope(
            kind=KIND_PROMPT, seq=self._seq, sid="task-engine", ts=now, body=body
        )
        self.hub.dispatch(env, role="engine", epoch=self._epoch, now=now)

    def _viable_target(self, kind: TaskKind, target: int) -> int:
        """Nudge a drawn target to the next column where the task is doable.

        Spatial selection must point away from the user's current column;
        scrolling needs more cards than fit on screen; selection and moves
        need a non-empty column. Deterministic, so identical runs issue
        identical prompts.
        """
        columns = self.hub.room.columns_per_side
        visible = self.hub.state.config.visible_cards
        for step in range(columns):
            candidate = (target + step) % columns
            col = self.hub.state.columns[(self.side, candidate)]
            if kind is TaskKind.SPATIAL_SELECT:
                if self.hub.state.highlights.get(self.sid) != (self.side, candidate):
                    return candidate
            elif kind is TaskKind.SCROLL_COLUMN:
                if len(col.cards) > visible:
                    return candidate
            elif kind in (TaskKind.SELECT_IMAGE, TaskKind.MOVE_TO_FRONT):
                if col.cards:
                    return candidate
            else:
                return candidate
        return target

    def issue_next(self, now: int) -> Optional[TaskPrompt]:
        spec = next(self._tasks, None)
        if spec is None:
            self.finished = True
            self.current = None
            return None
        target = self._viable_target(spec.kind, spec.target_index)
        self._counter += 1
        task_id = f"task{self._counter}"
        prompt = TaskPrompt(
            task_id=task_id,
            sid=self.sid,
            kind=spec.kind,
            target=(self.side, target),
            text=prompt_text(spec.kind, target, spec.topic),
            issued_at=now,
            topic=spec.topic,
        )
        self.current = prompt
        self._send_prompt(
            {
                "action": "show",
                "prompt": {
                    "id": task_id,
                    "sid": self.sid,
                    "text": prompt.text,
                    "style": "task",
                },
            },
            now,
        )
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_TASK,
                    "ev": "issued",
                    "task_id": task_id,
                    "kind": spec.kind.value,
                    "target": [self.side, target],
                    "topic": spec.topic,
                    "ts": now,
                }
            )
        return prompt

    def on_events(self, events: List[Event], revision: int, now: int) -> None:
        if self.current is None:
            return
        for event in events:
            if check_completion(self.current, event):
                self._complete(now)
                break

    def _complete(self, now: int) -> None:
        prompt = self.current
        self.timings.append(record_timing(prompt, now))
        if self.log is not None:
            self.log.append(
                {"line": LINE_TASK, "ev": "completed", "task_id": prompt.task_id, "ts": now}
            )
        self.current = None
        self._send_prompt({"action": "clear", "prompt_id": prompt.task_id}, now)

    def abandon_current(self, now: int) -> None:
        if self.current is None:
            return
        self.abandoned.append(self.current.task_id)
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_TASK,
                    "ev": "abandoned",
                    "task_id": self.current.task_id,
                    "ts": now,
                }
            )
        self._send_prompt({"action": "clear", "prompt_id": self.current.task_id}, now)
        self.current = None


# --- experiment 2: the recipe game -------------------------------------------------

class GamePhase(IntEnum):
    SEARCHING = 0
    REFINING = 1
    PLACING = 2
    DONE = 3


class GameMode(Enum):
    PRE_POPULATED = "pre_populated"
    VOICE_REQUIRED = "voice_required"


@dataclass(frozen=True)
class RecipeSpec:
    block_id: str
    title: str
    body: str
    answer_tags: frozenset
    target_rect: Tuple[int, int, int, int]  # u0, v0, u1, v1


@dataclass
class RecipeGame:
    game_id: str
    mode: GameMode
    recipes: Tuple[RecipeSpec, RecipeSpec]
    assignment: Dict[str, int] = field(default_factory=dict)  # sid -> recipe idx
    phases: Dict[str, GamePhase] = field(default_factory=dict)
    started_at: int = 0
    finished_at: Optional[int] = None

    @property
    def done(self) -> bool:
        return bool(self.phases) and all(
            p is GamePhase.DONE for p in self.phases.values()
        )

    def recipe_for(self, sid: str) -> RecipeSpec:
        return self.recipes[self.assignment[sid]]


def rect_contains(rect: Tuple[int, int, int, int], u: int, v: int) -> bool:
    u0, v0, u1, v1 = rect
    return u0 <= u <= u1 and v0 <= v <= v1


@dataclass(frozen=True)
class GameNotice:
    sid: str
    verdict: str  # "correct" | "incorrect" | "located" | "game_done"


def advance_game(game: RecipeGame, event: Event) -> List[GameNotice]:
    """Apply one canonical event to the game; phases only move forward."""
    notices: List[GameNotice] = []
    sid = getattr(event, "sid", None)
    if sid not in game.assignment or game.finished_at is not None:
        return notices
    recipe = game.recipe_for(sid)
    phase = game.phases[sid]

    if isinstance(event, CardsMovedToFront) and phase is GamePhase.SEARCHING:
        game.phases[sid] = GamePhase.REFINING
    elif isinstance(event, PlacedOnShared):
        correct = bool(set(event.tags) & set(recipe.answer_tags))
        if correct and phase is GamePhase.REFINING:
            game.phases[sid] = GamePhase.PLACING
            notices.append(GameNotice(sid=sid, verdict="correct"))
        elif not correct:
            # wrong image: visible feedback, image stays where it was placed
            notices.append(GameNotice(sid=sid, verdict="incorrect"))
    elif isinstance(event, DragChanged) and not event.started:
        correct = bool(set(event.tags) & set(recipe.answer_tags))
        if (
            phase is GamePhase.PLACING
            and correct
            and rect_contains(recipe.target_rect, event.u, event.v)
        ):
            game.phases[sid] = GamePhase.DONE
            notices.append(GameNotice(sid=sid, verdict="located"))
            if game.done:
                notices.append(GameNotice(sid=sid, verdict="game_done"))
    return notices


class GameRunner:
    """Feeds hub events into a recipe game and surfaces verdict prompts."""

    def __init__(self, hub, game: RecipeGame, log=None) -> None:
        self.hub = hub
        self.game = game
        self.log = log
        self._seq = 0
        self._epoch = hub.connect_client("game-engine", 0)
        hub.listeners.append(self.on_events)

    def start(self, now: int) -> None:
        self.game.started_at = now
        for sid in self.game.assignment:
            self.game.phases.setdefault(sid, GamePhase.SEARCHING)
        if self.log is not None:
            self.log.append(
                {
                    "line": LINE_GAME,
                    "ev": "start",
                    "game_id": self.game.game_id,
                    "mode": self.game.mode.value,
                    "ts": now,
                }
            )

    def _send_prompt(self, body: dict, now: int) -> None:
        self._seq += 1
        env = Envelope(
            kind=KIND_PROMPT, seq=self._seq, sid="game-engine", ts=now, body=body
        )
        self.hub.dispatch(env, role="engine", epoch=self._epoch, now=now)

    def on_events(self, events: List[Event], revision: int, now: int) -> None:
        for event in events:
            before = dict(self.game.phases)
            for notice in advance_game(self.game, event):
                self._announce(notice, now)
            after = self.game.phases
            if self.log is not None:
                for sid, phase in after.items():
                    if before.get(sid) != phase:
                        self.log.append(
                            {
                                "line": LINE_GAME,
                                "ev": "phase",
                                "game_id": self.game.game_id,
                                "sid": sid,
                                "phase": phase.name.lower(),
                                "ts": now,
                            }
                        )
            if self.game.done and self.game.finished_at is None:
                self.game.finished_at = now
                if self.log is not None:
                    self.log.append(
                        {
                            "line": LINE_GAME,
                            "ev": "done",
                            "game_id": self.game.game_id,
                            "ts": now,
                        }
                    )

    def _announce(self, notice: GameNotice, now: int) -> None:
        texts = {
            "correct": "Correct image! Long-tap to drag it to its spot.",
            "incorrect": "That image does not match the recipe.",
            "located": "Image placed. Nice work!",
            "game_done": "Both layouts complete!",
        }
        self._seq += 1
        pid = f"game-{self.game.game_id}-{self._seq}"
        self._send_prompt(
            {
                "action": "show",
                "prompt": {
                    "id": pid,
                    "sid": None if notice.verdict == "game_done" else notice.sid,
                    "text": texts[notice.verdict],
                    "style": "game",
                },
            },
            now,
        )

    def result(self) -> dict:
        completed = self.game.finished_at is not None
        return {
            "game_id": self.game.game_id,
            "mode": self.game.mode.value,
            "completed": completed,
            "duration_s": (
                (self.game.finished_at - self.game.started_at) / 1000.0
                if completed
                else None
            ),
        }
