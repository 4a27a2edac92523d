"""Regenerate the display-conformance fixtures from recorded headless runs.

Each fixture carries: the snapshot a display would receive on connect, a
scripted stream of diff records, the hub's snapshot mid-stream (where a
reconnecting client would resync), and the hub's final snapshot.

Two sessions are captured: a prompted-task run (columns, rings,
highlights, voice repopulation) and a recipe game (shared layout,
placements, drags), so every change op the hub emits shows up in at
least one fixture.

Run from the repo root: python frontend/scripts/gen_fixtures.py
"""

import copy
import json
import tempfile
from pathlib import Path

from wallspace.corpus import make_demo_corpus
from wallspace.sim import Exp1Config, Exp2Config, ScenarioConfig, run_scenario
from wallspace.state import apply_changes
from wallspace.tasks import GameMode

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def capture(result, name: str, diff_count: int) -> None:
    assert result.exit_code == 0, name
    initial = result.log.records[0]["snapshot"]
    diffs = [
        {"revision": r["rev"], "changes": r["changes"]}
        for r in result.log.records
        if r["line"] == "diff"
    ][:diff_count]
    assert len(diffs) >= 200, f"{name}: only {len(diffs)} diffs"
    mid = len(diffs) // 2

    snapshot = copy.deepcopy(initial)
    mid_snapshot = None
    ops = set()
    for i, diff in enumerate(diffs):
        ops.update(ch["op"] for ch in diff["changes"])
        snapshot = apply_changes(snapshot, diff["changes"])
        snapshot["revision"] = diff["revision"]
        if i + 1 == mid:
            mid_snapshot = copy.deepcopy(snapshot)

    out = FIXTURES / f"{name}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(
            {
                "initial": initial,
                "diffs": diffs,
                "mid_index": mid,
                "mid_snapshot": mid_snapshot,
                "final_snapshot": snapshot,
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    print(f"wrote {out} ({out.stat().st_size // 1024} KiB, {len(diffs)} diffs, ops: {sorted(ops)})")


with tempfile.TemporaryDirectory() as corpus:
    make_demo_corpus(corpus, write_images=False)
    capture(
        run_scenario(
            ScenarioConfig(seed=2024, experiment=Exp1Config(), corpus_dir=corpus)
        ),
        "session_tasks",
        diff_count=400,
    )
    capture(
        run_scenario(
            ScenarioConfig(
                seed=2024,
                experiment=Exp2Config(mode=GameMode.PRE_POPULATED),
                corpus_dir=corpus,
            )
        ),
        "session_game",
        diff_count=10_000,
    )
