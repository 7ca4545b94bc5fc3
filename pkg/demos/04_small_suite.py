"""
A small experiment suite
========================

Run methods and ablations over a few seeds, audit every cell and average the
valid ones.  The same spec as JSON runs from the command line with
``amrfleet suite spec.json``.
"""

import json
from pathlib import Path

from amrfleet.experiments import ExperimentSpec, aggregate, run_suite
from amrfleet.report import rows_to_csv, write_text

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

spec = ExperimentSpec.from_dict({
    "R": [2], "K": [4], "M": [1], "seeds": [1, 2, 3],
    "methods": ["rule", "energy", "matheuristic"],
    "ablations": ["none", "no_idle_aging", "no_charger_capacity"],
    "energy": [0.3, 0.45], "time_limit": 60,
})
write_text(out / "suite_spec.json", json.dumps(spec.to_dict(), indent=1))

rows = run_suite(spec, progress=lambda r: print(f"  {r.instance} {r.method:<13}{r.ablation:<21}{r.status}"))
write_text(out / "suite.csv", rows_to_csv(rows))

print(f"\n{'method':<14}{'ablation':<21}{'n':>3}{'objective':>12}{'sum A':>12}{'queue':>8}")
for (method, ablation), m in aggregate(rows).items():
    print(f"{method:<14}{ablation:<21}{m['n']:>3}{m['objective']:>12.3e}{m['total_degradation']:>12.3e}"
          f"{m['total_queueing']:>8.2f}")
