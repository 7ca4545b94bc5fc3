"""Comparison methods: threshold-charging dispatch and two reduced MILPs."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

from .domain import (
    Charge, Config, Direct, DomainError, FleetSchedule, Instance, TaskTiming, robot_degradation,
)
from .formulation import BuildOptions, MonolithicResult, decode_solution, build_monolithic, solve_fleet_model
from .solver import SolveLimits

EPS = 1e-9


class InfeasibleTaskError(DomainError):
    def __init__(self, task: int, reason: str):
        super().__init__(f"task {task} cannot be served: {reason}")
        self.task = task


@dataclass(frozen=True)
class DispatchPolicy:
    charge_threshold: float = 0.3
    charge_target: float = 0.8
    mode: int = 0  # standard
    # ties between equally near robots go to the lowest id

    def validate(self, instance: Instance):
        for robot in instance.robots:
            if not robot.Smin < self.charge_threshold < self.charge_target <= robot.Smax:
                raise DomainError("need Smin < charge_threshold < charge_target <= Smax")
            if not 0 <= self.mode < len(robot.modes):
                raise DomainError(f"robot {robot.id} has no charging mode {self.mode}")


@dataclass
class _RobotState:
    node: int = 0  # last task served (0 = depot)
    free: float = 0.0  # time the robot is done with its current activity
    soc: float = 0.0  # SOC once the current activity ends
    charge: tuple | None = None  # (charger, start, duration, arrival, soc_at_charger) awaiting a successor
    legs: list = None


def _nearest_charger(instance: Instance, node: int) -> int:
    return min(range(len(instance.chargers)), key=lambda m: (instance.tau_charger(node, m), m))


def _reserve_after(instance: Instance, k: int) -> float:
    """Energy needed after finishing task k to reach its nearest charger."""
    if not instance.chargers:
        return 0.0
    return instance.e_travel(instance.tau_charger(k, _nearest_charger(instance, k)))


def rule_based(instance: Instance, policy: DispatchPolicy = DispatchPolicy()) -> FleetSchedule:
    """Nearest-available dispatch with threshold charging.

    Released tasks are served in due-date order.  Each goes to the nearest idle
    robot (Manhattan distance, lowest id on ties) that can serve it and still
    reach the nearest charger above reserve.  A robot that finishes below the
    charge threshold charges in the policy mode up to the target, at the
    charger where it can start soonest (first come, first served).  When no
    idle robot has the energy for a released task, the idle robots charge.
    """
    policy.validate(instance)
    n, R = instance.n, len(instance.robots)
    _precheck(instance, policy)
    st = [_RobotState(0, 0.0, rb.S0, None, []) for rb in instance.robots]
    charger_free = [0.0] * len(instance.chargers)
    timing: dict[int, TaskTiming] = {}
    pending = set(range(1, n + 1))

    def loc_travel(r, k):
        s = st[r]
        if s.charge is not None:
            m = s.charge[0]
            return instance.tau_charger(k, m)
        return instance.tau(s.node, k)

    def can_serve(r, k):
        rb = instance.robots[r]
        tau = loc_travel(r, k)
        after = st[r].soc - instance.e_travel(tau) - instance.energy(k)
        return after - _reserve_after(instance, k) >= rb.Smin - EPS

    def send_to_charge(r):
        s, rb = st[r], instance.robots[r]
        done = s.free
        options = []
        for m in range(len(instance.chargers)):
            tau = instance.tau_charger(s.node, m)
            soc_at = s.soc - instance.e_travel(tau)
            if soc_at < rb.Smin - EPS:
                continue
            arrive = done + tau
            options.append((max(arrive, charger_free[m]), tau, m, arrive, soc_at))
        if not options:
            return False
        start, _, m, arrive, soc_at = min(options)
        duration = max(0.0, (policy.charge_target - soc_at) / rb.modes[policy.mode].rate)
        charger_free[m] = start + duration
        s.charge = (m, start, duration, arrive, soc_at)
        s.free = start + duration
        s.soc = soc_at + rb.modes[policy.mode].rate * duration
        return True

    def assign(r, k, t):
        s = st[r]
        task = instance.task(k)
        if s.charge is not None:
            m, start, duration, arrive, soc_at = s.charge
            tf = instance.tau_charger(k, m)
            T = max(max(t, s.free) + tf, task.release)
            post = s.soc
            wait = T - tf - start - duration
            s.legs.append(Charge(s.node, k, m, policy.mode, start=start, queue=start - arrive,
                                 duration=duration, wait=max(0.0, wait), post_soc=post))
            s_in = post - instance.e_travel(tf)
            s.charge = None
        else:
            tau = instance.tau(s.node, k)
            T = max(max(t, s.free) + tau, task.release)
            s.legs.append(Direct(s.node, k))
            s_in = s.soc - instance.e_travel(tau)
        timing[k] = TaskTiming(T, max(0.0, T - task.due), s_in)
        s.node, s.free, s.soc = k, T + task.service, s_in - task.energy
        pending.discard(k)
        if pending and s.soc < policy.charge_threshold and instance.chargers:
            send_to_charge(r)

    t = 0.0
    while pending:
        released = sorted((k for k in pending if instance.task(k).release <= t + EPS),
                          key=lambda k: (instance.task(k).due, k))
        progressed = False
        for k in released:
            idle = [r for r in range(R) if st[r].free <= t + EPS]
            if not idle:
                break
            able = [r for r in idle if can_serve(r, k)]
            if able:
                r = min(able, key=lambda r: (loc_travel(r, k), r))
                assign(r, k, t)
                progressed = True
                continue
            # nobody idle has the energy: idle robots that are not freshly charged go to charge
            for r in idle:
                if st[r].charge is None and send_to_charge(r):
                    progressed = True
        if progressed:
            continue
        future = [instance.task(k).release for k in pending if instance.task(k).release > t + EPS]
        future += [s.free for s in st if s.free > t + EPS]
        if not future:
            k = min(pending)
            raise InfeasibleTaskError(k, "no robot can reach it with enough charge under the dispatch policy")
        t = min(future)

    routes = []
    for s in st:
        if s.legs:
            s.legs.append(Direct(s.node, instance.sink))
        routes.append(tuple(s.legs))
    sched = FleetSchedule(tuple(routes), timing)
    return replace(sched, degradation=tuple(robot_degradation(instance, sched, "exact")))


def _precheck(instance: Instance, policy: DispatchPolicy):
    for k, task in enumerate(instance.tasks, start=1):
        need = task.energy + _reserve_after(instance, k)
        ok = False
        for rb in instance.robots:
            best = rb.S0 - instance.e_travel(instance.tau(0, k))
            for m in range(len(instance.chargers)):
                best = max(best, policy.charge_target - instance.e_travel(instance.tau_charger(k, m)))
            ok = ok or best - need >= rb.Smin - EPS
        if not ok:
            raise InfeasibleTaskError(k, f"energy {task.energy:.3f} exceeds the SOC swing any robot can supply")


# ---------------------------------------------------------------------------
# reduced MILPs


def energy_aware(instance: Instance, config: Config = Config(), limits: SolveLimits = SolveLimits(),
                 engine: str = "auto", warm_start: bool = True) -> MonolithicResult:
    """SOC-feasible MILP with degradation terms removed from the objective.

    With `warm_start` the rule-based dispatch schedule seeds the search, so
    a tight budget still returns an executable schedule whenever dispatch
    finds one inside the model.
    """
    warm = None
    if warm_start:
        try:
            warm = rule_based(instance)
        except InfeasibleTaskError:
            pass
    return _solve(instance, config, BuildOptions(degradation_terms=False), limits, engine, warm)


@dataclass
class ChargerUnawareResult:
    planned: MonolithicResult  # solver output, chargers treated as uncapacitated
    schedule: FleetSchedule | None  # after FIFO repair

    @property
    def status(self):
        return self.planned.status


def charger_unaware(instance: Instance, config: Config = Config(), limits: SolveLimits = SolveLimits(),
                    engine: str = "auto") -> ChargerUnawareResult:
    """Degradation-aware MILP without charger capacity, then FIFO repair."""
    planned = _solve(instance, config, BuildOptions(charger_capacity=False), limits, engine)
    fixed = fifo_repair(instance, planned.schedule) if planned.schedule is not None else None
    return ChargerUnawareResult(planned, fixed)


def _solve(instance, config, options, limits, engine, warm=None) -> MonolithicResult:
    t0 = time.perf_counter()
    fm = build_monolithic(instance, config, options)
    res, rounds = solve_fleet_model(fm, limits, engine, warm_start=warm)
    sched = decode_solution(fm, res.values) if res.has_solution else None
    return MonolithicResult(res.status, sched, res, fm, rounds, time.perf_counter() - t0)


def fifo_repair(instance: Instance, schedule: FleetSchedule) -> FleetSchedule:
    """Serialize charger sessions first come, first served by planned start.

    Planned times act as lower bounds: a delayed session starts when both the
    robot and the charger are free, task starts move later only as needed
    (post-charge waiting absorbs what it can), and delays propagate down each
    route.  Charging durations and hence all SOC values are unchanged.
    """
    R = len(schedule.routes)
    sessions = []
    for r, legs in enumerate(schedule.routes):
        for pos, leg in enumerate(legs):
            if isinstance(leg, Charge):
                sessions.append((leg.start, r, pos))
    sessions.sort()
    legs = [list(route) for route in schedule.routes]
    T = {k: t.start for k, t in schedule.timing.items()}
    done_upto = [0] * R  # legs before this index have final timing
    charger_free = [-math.inf] * len(instance.chargers)

    def finish(r, k):
        return 0.0 if k == 0 else T[k] + instance.service(k)

    def propagate(r, stop):
        # settle direct legs [done_upto, stop)
        for pos in range(done_upto[r], stop):
            leg = legs[r][pos]
            if leg.j == instance.sink:
                continue
            if isinstance(leg, Direct):
                T[leg.j] = max(T[leg.j], finish(r, leg.i) + instance.tau(leg.i, leg.j))
        done_upto[r] = max(done_upto[r], stop)

    for _, r, pos in sessions:
        propagate(r, pos)
        leg = legs[r][pos]
        arrive = finish(r, leg.i) + instance.tau_charger(leg.i, leg.charger)
        start = max(leg.start, arrive, charger_free[leg.charger])
        end = start + leg.duration
        charger_free[leg.charger] = end
        tf = instance.tau_charger(leg.j, leg.charger)
        T[leg.j] = max(T[leg.j], end + tf)
        legs[r][pos] = replace(leg, start=start, queue=start - arrive, wait=T[leg.j] - end - tf)
        done_upto[r] = pos + 1
    for r in range(R):
        propagate(r, len(legs[r]))
    timing = {k: TaskTiming(T[k], max(0.0, T[k] - instance.task(k).due), t.soc_in)
              for k, t in schedule.timing.items()}
    sched = FleetSchedule(tuple(tuple(l) for l in legs), timing)
    return replace(sched, degradation=tuple(robot_degradation(instance, sched, "exact")))
