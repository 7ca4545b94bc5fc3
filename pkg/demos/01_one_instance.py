"""
One instance, four planners
===========================

Generate a small fleet instance with heavy tasks, plan it with the dispatch
rule, the degradation-blind MILP, the full MILP and the matheuristic, and
audit every plan with the independent checker.
"""

from pathlib import Path

from amrfleet.audit import audit
from amrfleet.baselines import energy_aware, rule_based
from amrfleet.formulation import solve_monolithic
from amrfleet.generator import GenParams, generate
from amrfleet.matheuristic import run
from amrfleet.report import soc_svg, write_text
from amrfleet.solver import SolveLimits

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

# two robots, four tasks that each drain 30-45% of the battery
inst = generate(GenParams(R=2, K=4, M=1, seed=1, energy=(0.3, 0.45)))
for t in inst.tasks:
    print(f"task {t.id}: at {t.location}, window [{t.release:.0f}, {t.due:.0f}], energy {t.energy:.2f}")

plans = {
    "rule-based": rule_based(inst),
    "energy-aware": energy_aware(inst, limits=SolveLimits(time_limit=60)).schedule,
    "monolithic": solve_monolithic(inst, limits=SolveLimits(time_limit=120)).schedule,
    "matheuristic": run(inst).schedule,
}

# the audit recomputes every constraint and the exact objective from scratch
print(f"\n{'method':<14}{'ok':>4}{'objective':>12}{'sum A':>12}{'tardiness':>11}{'charges':>9}")
for name, sched in plans.items():
    rep = audit(inst, sched)
    m = rep.metrics
    print(f"{name:<14}{str(rep.ok):>4}{rep.objective:>12.3e}{m.total_degradation:>12.3e}"
          f"{m.total_tardiness:>11.2f}{len(list(sched.charges())):>9}")

# the matheuristic plan as a state-of-charge plot
write_text(out / "soc_matheuristic.svg", soc_svg(inst, plans["matheuristic"]))
print(f"\nSOC plot written to {out / 'soc_matheuristic.svg'}")
