"""Experiment suite: method comparison, ablations and weight sweeps.

Every cell is audited before its metrics are recorded.  Methods solve under
the (possibly ablated) model configuration; reported objectives are always
the exact objective under the suite's base configuration, so ablations are
compared on the same physics.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .audit import audit
from .baselines import InfeasibleTaskError, charger_unaware, energy_aware, rule_based
from .domain import Config, DomainError, FleetSchedule, Instance
from .formulation import BuildOptions, solve_monolithic
from .generator import GenParams, generate
from .matheuristic import MatheuristicLimits, NoIncumbentError, run
from .solver import SolveLimits

METHODS = ("rule", "energy", "nocharger", "monolithic", "matheuristic")

# ablation name -> (Config overrides, charger capacity modeled)
ABLATIONS = {
    "none": ({}, True),
    "no_idle_aging": ({"idle_aging": False}, True),
    "no_charge_aging": ({"charge_aging": False}, True),
    "no_charger_capacity": ({}, False),
    "no_balance": ({"rho": 0.0}, True),
    "single_partition": ({"P_S": 1, "P_W": 1}, True),
}


class SpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    R: list = field(default_factory=lambda: [2])
    K: list = field(default_factory=lambda: [6])
    M: list = field(default_factory=lambda: [1])
    seeds: list = field(default_factory=lambda: list(range(1, 11)))
    methods: list = field(default_factory=lambda: ["rule", "matheuristic"])
    ablations: list = field(default_factory=lambda: ["none"])
    mu_values: list = field(default_factory=list)  # empty: config.mu only
    rho_values: list = field(default_factory=list)  # empty: config.rho only
    time_limit: float = 60.0
    gap: float = 1e-6
    monolithic_max_tasks: int = 6  # larger instances skip the monolithic model
    energy: tuple = (0.02, 0.08)
    config: Config = field(default_factory=Config)
    out: Optional[str] = None

    def validate(self):
        for name in ("R", "K", "M", "seeds", "methods", "ablations"):
            if not getattr(self, name):
                raise SpecError(f"{name} must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise SpecError("seeds must be distinct")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise SpecError(f"unknown methods {bad}; choose from {list(METHODS)}")
        bad = [a for a in self.ablations if a not in ABLATIONS]
        if bad:
            raise SpecError(f"unknown ablations {bad}; choose from {list(ABLATIONS)}")
        if self.time_limit <= 0:
            raise SpecError("time_limit must be positive")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown spec keys {sorted(unknown)}")
        d = dict(d)
        if "config" in d:
            d["config"] = Config(**d["config"])
        if "energy" in d:
            d["energy"] = tuple(d["energy"])
        return cls(**d).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["energy"] = list(self.energy)
        return d


@dataclass
class ResultRow:
    instance: str
    R: int
    K: int
    M: int
    seed: int
    method: str
    ablation: str
    mu: float
    rho: float
    status: str  # ok | invalid | failed | skipped
    objective: float = math.nan
    total_degradation: float = math.nan
    max_degradation: float = math.nan
    imbalance: float = math.nan
    total_tardiness: float = math.nan
    throughput: int = -1
    total_queueing: float = math.nan
    max_violation: float = math.nan
    mccormick_gap: float = math.nan
    solver_status: str = ""
    gap_vs_monolithic: float = math.nan
    note: str = ""
    solve_seconds: float = math.nan  # wall time, excluded from determinism checks

    @property
    def valid(self) -> bool:
        return self.status == "ok"


COLUMNS = tuple(f.name for f in fields(ResultRow))
WALL_TIME_COLUMNS = ("solve_seconds",)


def instance_id(R: int, K: int, M: int, seed: int) -> str:
    return f"R{R}-K{K}-M{M}-s{seed}"


def solve_method(instance: Instance, method: str, config: Config = Config(), time_limit: float = 60.0,
                 gap: float = 1e-6, charger_capacity: bool = True,
                 audit_config: Optional[Config] = None) -> tuple[Optional[FleetSchedule], str]:
    """Run one method; returns (schedule or None, solver status)."""
    limits = SolveLimits(time_limit=time_limit, rel_gap=gap)
    if method == "rule":
        return rule_based(instance), "heuristic"
    if method == "energy":
        res = energy_aware(instance, config, limits)
        return res.schedule, res.status
    if method == "nocharger":
        res = charger_unaware(instance, config, limits)
        return res.schedule, res.status
    if method == "monolithic":
        if not charger_capacity:
            res = charger_unaware(instance, config, limits)
            return res.schedule, res.status
        res = solve_monolithic(instance, config, BuildOptions(), limits)
        return res.schedule, res.status
    if method == "matheuristic":
        mh = run(instance, config, MatheuristicLimits(time_limit=time_limit, master=limits),
                 charger_capacity=charger_capacity, audit_config=audit_config)
        return mh.schedule, mh.stop_reason
    raise SpecError(f"unknown method {method!r}")


def _cell(instance, ident, R, K, M, seed, method, ablation, base: Config, spec: ExperimentSpec) -> ResultRow:
    overrides, capacity = ABLATIONS[ablation]
    model_cfg = replace(base, **overrides)
    row = ResultRow(ident, R, K, M, seed, method, ablation, base.mu, base.rho, "failed")
    if method == "monolithic" and K > spec.monolithic_max_tasks:
        row.status, row.note = "skipped", f"over monolithic budget (K > {spec.monolithic_max_tasks})"
        return row
    t0 = time.perf_counter()
    try:
        sched, solver_status = solve_method(instance, method, model_cfg, spec.time_limit, spec.gap,
                                            capacity, audit_config=base)
    except (InfeasibleTaskError, NoIncumbentError, DomainError) as exc:
        row.solve_seconds = time.perf_counter() - t0
        row.note = str(exc)
        return row
    row.solve_seconds = time.perf_counter() - t0
    row.solver_status = solver_status
    if sched is None:
        row.note = "no schedule"
        return row
    rep = audit(instance, sched, base.feas_tol, base)
    m = rep.metrics
    row.objective = rep.objective
    row.total_degradation, row.max_degradation, row.imbalance = (
        m.total_degradation, m.max_degradation, m.imbalance)
    row.total_tardiness, row.throughput, row.total_queueing = m.total_tardiness, m.throughput, m.total_queueing
    row.max_violation, row.mccormick_gap = rep.max_violation, rep.mccormick_gap
    row.status = "ok" if rep.ok else "invalid"
    if not rep.ok:
        row.note = ",".join(sorted(rep.families()))
    return row


def run_suite(spec: ExperimentSpec, progress=None) -> list[ResultRow]:
    """Execute every (instance, method, seed, ablation, weight) cell in a fixed order."""
    spec.validate()
    rows = []
    mus = spec.mu_values or [spec.config.mu]
    rhos = spec.rho_values or [spec.config.rho]
    for R in spec.R:
        for K in spec.K:
            for M in spec.M:
                for seed in spec.seeds:
                    inst = generate(GenParams(R=R, K=K, M=M, seed=seed, energy=tuple(spec.energy)))
                    ident = instance_id(R, K, M, seed)
                    for mu in mus:
                        for rho in rhos:
                            base = replace(spec.config, mu=mu, rho=rho)
                            cells = []
                            for ablation in spec.ablations:
                                for method in spec.methods:
                                    row = _cell(inst, ident, R, K, M, seed, method, ablation, base, spec)
                                    cells.append(row)
                                    if progress:
                                        progress(row)
                            _fill_gaps(cells)
                            rows += cells
    return rows


def _fill_gaps(cells: list[ResultRow]):
    """Relative gap to the monolithic objective, only where monolithic proved optimality."""
    ref = {c.ablation: c.objective for c in cells
           if c.method == "monolithic" and c.valid and c.solver_status == "optimal"}
    for c in cells:
        if c.valid and c.ablation in ref:
            r = ref[c.ablation]
            c.gap_vs_monolithic = (c.objective - r) / max(abs(r), 1e-12) if r else c.objective - r


def aggregate(rows: list[ResultRow], key=("method", "ablation")) -> dict:
    """Mean metrics over valid rows, grouped by `key`; invalid rows are excluded."""
    groups: dict = {}
    for row in rows:
        if row.valid:
            groups.setdefault(tuple(getattr(row, k) for k in key), []).append(row)
    out = {}
    for g, rs in sorted(groups.items()):
        out[g] = {name: sum(getattr(r, name) for r in rs) / len(rs)
                  for name in ("objective", "total_degradation", "max_degradation", "total_tardiness",
                               "total_queueing", "solve_seconds")}
        out[g]["n"] = len(rs)
    return out


@dataclass(frozen=True)
class ParetoPoint:
    mu: float
    total_degradation: float
    total_tardiness: float
    objective: float


def pareto_sweep(instance: Instance, mu_values, config: Config = Config(), time_limit: float = 60.0,
                 method: str = "matheuristic") -> list[ParetoPoint]:
    """Degradation and tardiness of the chosen method for each tardiness weight, ordered by mu."""
    mus = sorted(float(m) for m in mu_values)
    if len(mus) < 2:
        raise SpecError("a sweep needs at least two mu values")
    points = []
    for mu in mus:
        cfg = replace(config, mu=mu)
        sched, _ = solve_method(instance, method, cfg, time_limit)
        rep = audit(instance, sched, cfg.feas_tol, cfg)
        points.append(ParetoPoint(mu, rep.metrics.total_degradation, rep.metrics.total_tardiness, rep.objective))
    return points


def load_spec(path: str) -> ExperimentSpec:
    with open(path) as fh:
        return ExperimentSpec.from_dict(json.load(fh))
