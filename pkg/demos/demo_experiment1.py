"""Headless run of the prompted-task experiment with a scripted participant.

The agent walks to prompted columns, scrolls, selects, swipes images to
the front screen, and asks for pictures by voice; the report mirrors the
per-action timing breakdown a live session would produce.

Run: python demos/demo_experiment1.py [seed]
"""

import sys
import tempfile

from wallspace.corpus import make_demo_corpus
from wallspace.sim import Exp1Config, ScenarioConfig, run_scenario

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7

with tempfile.TemporaryDirectory() as corpus:
    make_demo_corpus(corpus, write_images=False)
    result = run_scenario(
        ScenarioConfig(seed=seed, experiment=Exp1Config(), corpus_dir=corpus)
    )

print(f"seed {seed}: exit {result.exit_code}, "
      f"{result.sim_ms / 1000:.1f} simulated seconds, "
      f"{len(result.log.records)} log records\n")
print(f"{'task kind':<18}{'count':>6}{'mean s':>9}{'median s':>10}")
for kind, bucket in result.report.tasks.items():
    mean = f"{bucket['mean_s']:.2f}" if "mean_s" in bucket else "-"
    median = f"{bucket['median_s']:.2f}" if "median_s" in bucket else "-"
    print(f"{kind:<18}{bucket['count']:>6}{mean:>9}{median:>10}")

prompts = [r for r in result.log.records if r["line"] == "task" and r["ev"] == "issued"]
print(f"\nfirst prompts the wall showed:")
for r in prompts[:5]:
    print(f"  t={r['ts'] / 1000:6.1f}s  {r['kind']:<16} column {r['target'][1] + 1}")
