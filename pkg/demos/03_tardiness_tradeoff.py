"""
Degradation against lateness
============================

Sweep the tardiness weight and record the total degradation and tardiness of
each plan.  The sweep data goes to CSV and a small SVG scatter.
"""

from pathlib import Path

from amrfleet.experiments import pareto_sweep
from amrfleet.generator import GenParams, generate
from amrfleet.report import pareto_svg, pareto_to_csv, write_text

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

# one robot with tight windows: charging longer is kinder to the battery
# only if the next task can wait
inst = generate(GenParams(R=1, K=3, M=1, seed=3, energy=(0.25, 0.4)))
points = pareto_sweep(inst, [0.0, 1e-5, 1e-4, 1e-3, 1.0], time_limit=60, method="monolithic")
for p in points:
    print(f"mu = {p.mu:<8g} degradation {p.total_degradation:.3e}  tardiness {p.total_tardiness:7.2f} min")

write_text(out / "pareto.csv", pareto_to_csv(points))
write_text(out / "pareto.svg", pareto_svg(points))
print(f"written {out / 'pareto.csv'} and {out / 'pareto.svg'}")
