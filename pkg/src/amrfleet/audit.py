"""Solver-free schedule verification.

The audit reads only an :class:`Instance` and a :class:`FleetSchedule`.
Indicator constraints are checked in their logical form on the transitions
the schedule actually uses, so no big-M constant enters the check.  Charger
non-overlap is checked over every pair of charging sessions in the fleet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .domain import (
    Charge, Config, Direct, FleetSchedule, Instance, Leg, Metrics, ScheduleError,
    compute_metrics, objective,
)

FAMILIES = (
    "assignment", "release", "tardiness", "direct_precedence", "charge_start", "charge_queue",
    "charge_to_task", "charge_bounds", "soc_bounds", "reserve", "direct_soc", "reach_charger",
    "postcharge_soc", "arrival_soc", "soc_trace", "charger_overlap",
)


@dataclass(frozen=True)
class Violation:
    family: str
    indices: tuple
    magnitude: float


@dataclass
class AuditReport:
    violations: list = field(default_factory=list)
    max_violation: float = 0.0
    mccormick_gap: float = 0.0
    metrics: Optional[Metrics] = None
    objective: Optional[float] = None
    worst: dict = field(default_factory=dict)  # family -> worst magnitude seen

    @property
    def ok(self) -> bool:
        return not self.violations

    def families(self) -> set:
        return {v.family for v in self.violations}

    def summary(self) -> str:
        lines = [f"violations: {len(self.violations)}  max: {self.max_violation:.3g}  "
                 f"McCormick gap: {self.mccormick_gap:.3g}"]
        for fam in FAMILIES:
            hits = [v for v in self.violations if v.family == fam]
            if hits:
                worst = max(hits, key=lambda v: v.magnitude)
                lines.append(f"  {fam}: {len(hits)} (worst {worst.magnitude:.3g} at {worst.indices})")
        if self.metrics is not None:
            m = self.metrics
            lines.append(f"degradation total {m.total_degradation:.6g} max {m.max_degradation:.6g}; "
                         f"tardiness {m.total_tardiness:.6g}; on time {m.throughput}; queue {m.total_queueing:.6g}")
        if self.objective is not None:
            lines.append(f"objective (exact) {self.objective:.6g}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_violation": self.max_violation,
            "mccormick_gap": self.mccormick_gap,
            "objective": self.objective,
            "violations": [{"family": v.family, "indices": list(v.indices), "magnitude": v.magnitude}
                           for v in self.violations],
            "metrics": None if self.metrics is None else self.metrics.__dict__,
        }


class _Checker:
    def __init__(self, tol: float, overrides: dict):
        self.tol = tol
        self.overrides = overrides
        self.report = AuditReport()

    def check(self, family: str, indices, magnitude: float):
        """Record `magnitude` (amount by which a constraint is violated; <= 0 means satisfied)."""
        mag = float(magnitude)
        rep = self.report
        if mag > rep.worst.get(family, 0.0):
            rep.worst[family] = mag
        rep.max_violation = max(rep.max_violation, mag)
        if mag > self.overrides.get(family, self.tol):
            rep.violations.append(Violation(family, tuple(indices), mag))


def _check_structure(instance: Instance, r: int, legs: Sequence[Leg]):
    if not legs:
        return
    robot = instance.robots[r]
    prev = 0
    for pos, leg in enumerate(legs):
        if not isinstance(leg, (Direct, Charge)):
            raise ScheduleError(f"robot {r}: leg {pos} has unknown type {type(leg).__name__}")
        if leg.i != prev:
            raise ScheduleError(f"robot {r}: leg {pos} leaves node {leg.i}, expected {prev}")
        last = pos == len(legs) - 1
        if last and leg.j != instance.sink:
            raise ScheduleError(f"robot {r}: route does not end at the sink")
        if not last and not 1 <= leg.j <= instance.n:
            raise ScheduleError(f"robot {r}: leg {pos} enters invalid node {leg.j}")
        if isinstance(leg, Charge):
            if leg.j == instance.sink:
                raise ScheduleError(f"robot {r}: charging transition into the sink")
            if not 0 <= leg.charger < len(instance.chargers):
                raise ScheduleError(f"robot {r}: unknown charger {leg.charger}")
            if not 0 <= leg.mode < len(robot.modes):
                raise ScheduleError(f"robot {r}: unknown charging mode {leg.mode}")
        prev = leg.j


def _audit_route(instance: Instance, r: int, legs: Sequence[Leg], timing: dict, ck: _Checker):
    robot = instance.robots[r]
    T = lambda i: 0.0 if i == 0 else timing[i].start  # noqa: E731
    s_in = lambda i: robot.S0 if i == 0 else timing[i].soc_in  # noqa: E731
    trace_soc = robot.S0  # SOC propagated from S0 using only durations and energies
    for leg in legs:
        i, j = leg.i, leg.j
        done = T(i) + instance.service(i)
        after_i = s_in(i) - instance.energy(i)
        after_i_trace = trace_soc - instance.energy(i)
        if j == instance.sink:
            break
        task = instance.task(j)
        if isinstance(leg, Direct):
            ck.check("direct_precedence", (r, i, j), done + instance.tau(i, j) - T(j))
            drop = instance.e_travel(instance.tau(i, j))
            ck.check("direct_soc", (r, i, j), abs(after_i - drop - s_in(j)))
            trace_soc = after_i_trace - drop
        else:
            m = leg.charger
            mode = robot.modes[leg.mode]
            arrive = done + instance.tau_charger(i, m)
            for name in ("start", "queue", "duration", "wait", "post_soc"):
                ck.check("charge_bounds", (r, i, j, name), -getattr(leg, name))
            ck.check("charge_bounds", (r, i, j, "post_soc_max"), leg.post_soc - robot.Smax)
            ck.check("charge_start", (r, i, j), arrive - leg.start)
            ck.check("charge_queue", (r, i, j), (leg.start - arrive) - leg.queue)
            tf = instance.tau_charger(j, m)
            ck.check("charge_to_task", (r, i, j), abs(T(j) - (leg.start + leg.duration + tf + leg.wait)))
            at_chg = after_i - instance.e_travel(instance.tau_charger(i, m))
            ck.check("reach_charger", (r, i, j), robot.Smin - at_chg)
            ck.check("postcharge_soc", (r, i, j), abs(leg.post_soc - (at_chg + mode.rate * leg.duration)))
            ef = instance.e_travel(tf)
            ck.check("arrival_soc", (r, i, j), abs(s_in(j) - (leg.post_soc - ef)))
            at_chg_trace = after_i_trace - instance.e_travel(instance.tau_charger(i, m))
            ck.check("soc_trace", (r, i, j, "charger"), robot.Smin - at_chg_trace)
            trace_soc = at_chg_trace + mode.rate * leg.duration - ef
        ck.check("release", (j,), task.release - T(j))
        ck.check("tardiness", (j,), (T(j) - task.due) - timing[j].tardiness)
        ck.check("tardiness", (j, "sign"), -timing[j].tardiness)
        ck.check("soc_bounds", (r, j), max(-s_in(j), s_in(j) - robot.Smax))
        ck.check("reserve", (r, j), robot.Smin - (s_in(j) - task.energy))
        ck.check("soc_trace", (r, j), abs(trace_soc - s_in(j)))


def audit(instance: Instance, schedule: FleetSchedule, tolerance: float = 1e-6,
          config: Config = Config(), robots: Optional[Sequence[int]] = None,
          family_tolerance: Optional[dict] = None) -> AuditReport:
    """Check every constraint family on `schedule`.

    With `robots` given, only those routes are checked and task coverage is
    restricted to their tasks (used for single-robot schedule fragments).
    Raises :class:`ScheduleError` for structurally broken schedules.
    """
    if len(schedule.routes) != len(instance.robots):
        raise ScheduleError(f"schedule has {len(schedule.routes)} routes for {len(instance.robots)} robots")
    ck = _Checker(tolerance, family_tolerance or {})
    which = range(len(instance.robots)) if robots is None else list(robots)
    owner = {}
    for r in which:
        legs = schedule.routes[r]
        _check_structure(instance, r, legs)
        for k in schedule.assigned(r):
            if k in owner:
                raise ScheduleError(f"task {k} appears on robots {owner[k]} and {r}")
            owner[k] = r
            if k not in schedule.timing:
                raise ScheduleError(f"task {k} has no timing record")
    if robots is None:
        for k in range(1, instance.n + 1):
            ck.check("assignment", (k,), 0.0 if k in owner else 1.0)
    for r in which:
        _audit_route(instance, r, schedule.routes[r], schedule.timing, ck)
    sessions = [(r, leg) for r, leg in schedule.charges() if r in set(which)]
    for (r1, a), (r2, b) in combinations(sessions, 2):
        if a.charger == b.charger:
            overlap = min(a.end, b.end) - max(a.start, b.start)
            ck.check("charger_overlap", (a.charger, (r1, a.i, a.j), (r2, b.i, b.j)), overlap)
    rep = ck.report
    gaps = [abs(leg.aux - leg.idle_product) for _, leg in sessions if leg.aux is not None]
    rep.mccormick_gap = max(gaps, default=0.0)
    if robots is None:
        rep.metrics = compute_metrics(instance, schedule, tol=tolerance)
        rep.objective = objective(instance, schedule, config, "exact")
    return rep


def soc_trace(instance: Instance, robot: int, legs: Sequence[Leg], timing: dict) -> tuple[np.ndarray, np.ndarray]:
    """Time-stamped SOC breakpoints of one route, propagated forward from S0.

    Service and travel drain linearly, charging rises at the mode rate, and
    the robot idles at the post-charge SOC before leaving the charger.
    The series ends when the last task is finished.
    """
    rb = instance.robots[robot]
    times, socs = [0.0], [rb.S0]

    def add(t, s):
        times.append(float(t))
        socs.append(float(s))

    soc = rb.S0
    for leg in legs:
        i, j = leg.i, leg.j
        t = 0.0 if i == 0 else timing[i].start
        if i != 0:
            add(t, soc)
            soc -= instance.energy(i)
            t += instance.service(i)
            add(t, soc)
        if j == instance.sink:
            break
        if isinstance(leg, Direct):
            tau = instance.tau(i, j)
            soc -= instance.e_travel(tau)
            add(t + tau, soc)
        else:
            m = leg.charger
            tau = instance.tau_charger(i, m)
            soc -= instance.e_travel(tau)
            add(t + tau, soc)
            add(leg.start, soc)
            soc += rb.modes[leg.mode].rate * leg.duration
            add(leg.end, soc)
            add(leg.end + leg.wait, soc)
            tf = instance.tau_charger(j, m)
            soc -= instance.e_travel(tf)
            add(leg.end + leg.wait + tf, soc)
    return np.asarray(times), np.asarray(socs)


def restrict(r: int, legs: Sequence[Leg], timing: dict, R: int) -> FleetSchedule:
    """A fleet schedule holding only robot r's route (for fragment audits)."""
    routes = tuple(tuple(legs) if rr == r else () for rr in range(R))
    return FleetSchedule(routes, {k: timing[k] for k in timing})

