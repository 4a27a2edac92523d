"""Record a run, replay it bit-for-bit, then catch a tampered log.

Run: python demos/demo_replay.py
"""

import copy
import tempfile

from wallspace.corpus import make_demo_corpus
from wallspace.sim import (
    Exp1Config,
    ReplayDivergence,
    ScenarioConfig,
    replay_records,
    run_scenario,
)

with tempfile.TemporaryDirectory() as corpus:
    make_demo_corpus(corpus, write_images=False)
    result = run_scenario(
        ScenarioConfig(seed=3, experiment=Exp1Config(), corpus_dir=corpus)
    )

print(f"recorded {len(result.log.records)} log records, final revision "
      f"{result.final_snapshot['revision']}")

rebuilt = replay_records(result.log.records)
print("replay reproduces the final snapshot:", rebuilt == result.final_snapshot)

tampered = copy.deepcopy(result.log.records)
for record in reversed(tampered):
    if (
        record["line"] == "env"
        and record["env"]["kind"] == "gesture"
        and record["env"]["body"].get("gesture") == "swipe_right"
        and record["applied"]
    ):
        record["env"]["body"]["gesture"] = "double_tap"
        print("tampering: turned one swipe_right into a double_tap...")
        break
try:
    replay_records(tampered)
    print("tampering went unnoticed (bug!)")
except ReplayDivergence as e:
    print(f"tampering detected: {e}")
