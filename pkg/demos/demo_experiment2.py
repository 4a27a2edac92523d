"""Two scripted players complete the recipe layout game, both variants.

Pre-populated rounds hide the answer image inside a side column; the
voice-required rounds force a spoken "show me pictures of ..." first.

Run: python demos/demo_experiment2.py
"""

import tempfile

from wallspace.corpus import make_demo_corpus
from wallspace.sim import Exp2Config, ScenarioConfig, run_scenario
from wallspace.tasks import GameMode

with tempfile.TemporaryDirectory() as corpus:
    make_demo_corpus(corpus, write_images=False)
    for mode in (GameMode.PRE_POPULATED, GameMode.VOICE_REQUIRED):
        result = run_scenario(
            ScenarioConfig(seed=7, experiment=Exp2Config(mode=mode), corpus_dir=corpus)
        )
        game = result.report.games[0]
        print(f"{mode.value:>15}: exit {result.exit_code}, "
              f"completed={game['completed']}, duration {game['duration_s']:.1f} s (simulated)")
        phases = [r for r in result.log.records if r["line"] == "game" and r["ev"] == "phase"]
        for r in phases:
            print(f"    t={r['ts'] / 1000:5.1f}s  {r['sid']}: {r['phase']}")
        placed = result.final_snapshot["front"]["shared"]["placed"]
        print(f"    shared screen ended with {len(placed)} placed image(s): "
              + ", ".join(sorted(i["card"]["tags"][0] for i in placed.values())))
