import pytest

from wallspace.state import (
    CardSelected,
    CardsMovedToFront,
    ColumnPopulated,
    ColumnScrolled,
    DragChanged,
    HighlightChanged,
    PlacedOnShared,
)
from wallspace.tasks import (
    ClockSkew,
    GameMode,
    GamePhase,
    RecipeGame,
    RecipeSpec,
    TaskKind,
    TaskPrompt,
    advance_game,
    build_report,
    check_completion,
    gen_tasks,
    lower_median,
    record_timing,
    report_from_log,
)

TOPICS = ("dogs", "cats", "avocado")


def drawn(seed):
    return list(gen_tasks(seed, "left", TOPICS))


class TestGenTasks:
    def test_count_in_range(self):
        for seed in range(100):
            n = len(drawn(seed))
            assert 20 <= n <= 35

    def test_deterministic(self):
        assert drawn(42) == drawn(42)

    def test_all_kinds_appear_over_seeds(self):
        seen = set()
        for seed in range(50):
            seen.update(t.kind for t in drawn(seed))
        assert seen == set(TaskKind)

    def test_voice_frequency_near_one_ninth(self):
        tasks = []
        seed = 0
        while len(tasks) < 10_000:
            tasks.extend(drawn(seed))
            seed += 1
        tasks = tasks[:10_000]
        freq = sum(t.kind is TaskKind.VOICE_POPULATE for t in tasks) / len(tasks)
        assert abs(freq - 1 / 9) <= 0.01

    def test_targets_cover_all_columns(self):
        targets = {t.target_index for seed in range(30) for t in drawn(seed)}
        assert targets == set(range(9))

    def test_voice_tasks_carry_topics(self):
        for seed in range(20):
            for t in drawn(seed):
                assert (t.topic is not None) == (t.kind is TaskKind.VOICE_POPULATE)


def prompt(kind, target=("left", 8), topic=None):
    return TaskPrompt(
        task_id="t1", sid="s1", kind=kind, target=target,
        text="", issued_at=1000, topic=topic,
    )


class TestCheckCompletion:
    def test_spatial_select(self):
        p = prompt(TaskKind.SPATIAL_SELECT)
        assert check_completion(p, HighlightChanged(sid="s1", old=None, new=("left", 8)))
        assert not check_completion(p, HighlightChanged(sid="s1", old=None, new=("left", 7)))
        assert not check_completion(p, HighlightChanged(sid="s2", old=None, new=("left", 8)))

    def test_scroll(self):
        p = prompt(TaskKind.SCROLL_COLUMN, target=("left", 3))
        assert check_completion(p, ColumnScrolled(sid="s1", side="left", index=3, old=0, new=1))
        assert not check_completion(p, ColumnScrolled(sid="s1", side="left", index=2, old=0, new=1))

    def test_select_image(self):
        p = prompt(TaskKind.SELECT_IMAGE, target=("left", 2))
        good = CardSelected(sid="s1", surface=("column", "left", 2), image_id="c1", selected=True)
        off_target = CardSelected(sid="s1", surface=("column", "left", 4), image_id="c1", selected=True)
        deselect = CardSelected(sid="s1", surface=("column", "left", 2), image_id="c1", selected=False)
        assert check_completion(p, good)
        assert not check_completion(p, off_target)
        assert not check_completion(p, deselect)

    def test_move_to_front(self):
        p = prompt(TaskKind.MOVE_TO_FRONT, target=("left", 5))
        assert check_completion(
            p, CardsMovedToFront(sid="s1", side="left", index=5, image_ids=("c1",))
        )

    def test_voice_topic_must_match(self):
        p = prompt(TaskKind.VOICE_POPULATE, target=("left", 6), topic="dogs")
        good = ColumnPopulated(sid="s1", side="left", index=6, query="dogs", count=3)
        wrong = ColumnPopulated(sid="s1", side="left", index=6, query="cats", count=3)
        assert check_completion(p, good)
        assert not check_completion(p, wrong)


class TestTiming:
    def test_duration(self):
        t = record_timing(prompt(TaskKind.SCROLL_COLUMN), completion_ts=4200)
        assert t.duration_ms == 3200

    def test_clock_skew(self):
        with pytest.raises(ClockSkew):
            record_timing(prompt(TaskKind.SCROLL_COLUMN), completion_ts=999)


class TestReport:
    def test_mean_and_lower_median(self):
        from wallspace.tasks import TaskTiming

        timings = [
            TaskTiming("a", TaskKind.SCROLL_COLUMN, 1000),
            TaskTiming("b", TaskKind.SCROLL_COLUMN, 2000),
            TaskTiming("c", TaskKind.SCROLL_COLUMN, 100_000),
        ]
        report = build_report(timings)
        bucket = report.tasks["scroll_column"]
        assert bucket["count"] == 3
        assert bucket["mean_s"] == pytest.approx(34.3333333)
        assert bucket["median_s"] == 2.0

    def test_lower_median_even_count(self):
        assert lower_median([1.0, 2.0, 3.0, 4.0]) == 2.0

    def test_empty_bucket_omits_stats(self):
        report = build_report([])
        for kind in TaskKind:
            assert report.tasks[kind.value] == {"count": 0}

    def test_csv_shape(self):
        report = build_report([])
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "kind,count,mean_s,median_s"
        assert len(lines) == 1 + len(TaskKind)

    def test_report_from_log_matches_direct(self):
        records = [
            {"line": "header"},
            {"line": "task", "ev": "issued", "task_id": "t1", "kind": "scroll_column",
             "target": ["left", 1], "topic": None, "ts": 0},
            {"line": "task", "ev": "completed", "task_id": "t1", "ts": 1500},
            {"line": "task", "ev": "issued", "task_id": "t2", "kind": "select_image",
             "target": ["left", 2], "topic": None, "ts": 2000},
            {"line": "task", "ev": "abandoned", "task_id": "t2", "ts": 9000},
            {"line": "game", "ev": "start", "game_id": "g1", "mode": "pre_populated", "ts": 0},
            {"line": "game", "ev": "done", "game_id": "g1", "ts": 60_000},
        ]
        report = report_from_log(records)
        assert report.tasks["scroll_column"] == {"count": 1, "mean_s": 1.5, "median_s": 1.5}
        assert report.tasks["select_image"] == {"count": 0}
        assert report.games == [
            {"game_id": "g1", "mode": "pre_populated", "completed": True, "duration_s": 60.0}
        ]


def game():
    recipes = (
        RecipeSpec("r1", "Guacamole", "mash the avocado", frozenset({"avocado"}), (100, 100, 400, 400)),
        RecipeSpec("r2", "Salad", "slice the tomato", frozenset({"tomato"}), (600, 100, 900, 400)),
    )
    g = RecipeGame(
        game_id="g1", mode=GameMode.PRE_POPULATED, recipes=recipes,
        assignment={"sa": 0, "sb": 1},
    )
    g.phases = {"sa": GamePhase.SEARCHING, "sb": GamePhase.SEARCHING}
    return g


class TestGame:
    def test_full_happy_path(self):
        g = game()
        advance_game(g, CardsMovedToFront(sid="sa", side="left", index=1, image_ids=("c1",)))
        assert g.phases["sa"] is GamePhase.REFINING
        notices = advance_game(
            g, PlacedOnShared(sid="sa", image_id="c1", u=500, v=500, tags=("avocado",))
        )
        assert g.phases["sa"] is GamePhase.PLACING
        assert notices[0].verdict == "correct"
        notices = advance_game(
            g,
            DragChanged(sid="sa", image_id="c1", started=False, u=200, v=200, tags=("avocado",)),
        )
        assert g.phases["sa"] is GamePhase.DONE
        assert not g.done  # sb still searching

    def test_wrong_image_stays_refining(self):
        g = game()
        advance_game(g, CardsMovedToFront(sid="sa", side="left", index=1, image_ids=("c9",)))
        notices = advance_game(
            g, PlacedOnShared(sid="sa", image_id="c9", u=500, v=500, tags=("dog",))
        )
        assert notices[0].verdict == "incorrect"
        assert g.phases["sa"] is GamePhase.REFINING

    def test_drop_outside_target_not_done(self):
        g = game()
        advance_game(g, CardsMovedToFront(sid="sa", side="left", index=1, image_ids=("c1",)))
        advance_game(g, PlacedOnShared(sid="sa", image_id="c1", u=500, v=500, tags=("avocado",)))
        advance_game(
            g, DragChanged(sid="sa", image_id="c1", started=False, u=950, v=200, tags=("avocado",))
        )
        assert g.phases["sa"] is GamePhase.PLACING

    def test_phases_never_regress(self):
        g = game()
        events = [
            CardsMovedToFront(sid="sa", side="left", index=1, image_ids=("c1",)),
            PlacedOnShared(sid="sa", image_id="c1", u=500, v=500, tags=("avocado",)),
            CardsMovedToFront(sid="sa", side="left", index=2, image_ids=("c2",)),
            PlacedOnShared(sid="sa", image_id="c2", u=500, v=500, tags=("dog",)),
        ]
        history = []
        for e in events:
            advance_game(g, e)
            history.append(g.phases["sa"])
        assert history == sorted(history)

    def test_done_when_both_done(self):
        g = game()
        for sid, tag, rect_center in (("sa", "avocado", (200, 200)), ("sb", "tomato", (700, 200))):
            advance_game(g, CardsMovedToFront(sid=sid, side="left", index=1, image_ids=("c",)))
            advance_game(g, PlacedOnShared(sid=sid, image_id="c", u=500, v=500, tags=(tag,)))
            notices = advance_game(
                g,
                DragChanged(sid=sid, image_id="c", started=False,
                            u=rect_center[0], v=rect_center[1], tags=(tag,)),
            )
        assert g.done
        assert any(n.verdict == "game_done" for n in notices)
