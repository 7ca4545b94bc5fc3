from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amrfleet.audit import FAMILIES, audit, restrict, soc_trace
from amrfleet.baselines import rule_based
from amrfleet.domain import Charge, Direct, FleetSchedule, ScheduleError, TaskTiming
from amrfleet.generator import GenParams, generate


def test_hand_schedule_is_clean(hand):
    inst, sched = hand
    rep = audit(inst, sched)
    assert rep.ok, rep.summary()
    assert rep.max_violation < 1e-9
    assert rep.metrics.throughput == 2 and rep.metrics.total_tardiness == 0
    assert rep.metrics.total_degradation == pytest.approx(1.2091e-3, rel=1e-9)
    assert rep.objective == pytest.approx(1.5 * 1.2091e-3, rel=1e-9)  # single robot: A_max = A


def test_late_start_is_reported_with_its_magnitude(hand):
    inst, sched = hand
    t2 = sched.timing[2]
    bad = FleetSchedule(sched.routes, {**sched.timing, 2: replace(t2, start=t2.start - 10)})
    rep = audit(inst, bad)
    assert "charge_to_task" in rep.families()
    worst = max(v.magnitude for v in rep.violations if v.family == "charge_to_task")
    assert worst == pytest.approx(10.0)


def test_direct_precedence_violation(hand):
    inst, _ = hand
    # a direct move that arrives before it can: T1 = 1 is the earliest start
    legs = (Direct(0, 1), Direct(1, 2), Direct(2, 3))
    tau = inst.tau(1, 2)
    timing = {1: TaskTiming(1.0, 0.0, 0.798),
              2: TaskTiming(1.0 + 5 + tau - 3, 0.0, 0.798 - 0.3 - inst.e_travel(tau))}
    rep = audit(inst, FleetSchedule((legs,), timing))
    v = [v for v in rep.violations if v.family == "direct_precedence"]
    assert len(v) == 1 and v[0].magnitude == pytest.approx(3.0) and v[0].indices == (0, 1, 2)


def test_overlapping_sessions_are_caught():
    inst = generate(GenParams(R=2, K=2, M=1, seed=3))
    leg = Charge(0, 1, 0, 0, start=10.0, queue=0.0, duration=5.0, wait=0.0, post_soc=0.9)
    other = Charge(0, 2, 0, 0, start=12.0, queue=0.0, duration=5.0, wait=0.0, post_soc=0.9)
    timing = {1: TaskTiming(100, 0, 0.5), 2: TaskTiming(100, 0, 0.5)}
    sched = FleetSchedule(((leg, Direct(1, 3)), (other, Direct(2, 3))), timing)
    rep = audit(inst, sched)
    hits = [v for v in rep.violations if v.family == "charger_overlap"]
    assert len(hits) == 1 and hits[0].magnitude == pytest.approx(3.0)


def test_structural_errors_raise(hand):
    inst, sched = hand
    with pytest.raises(ScheduleError, match="routes"):
        audit(inst, FleetSchedule((), sched.timing))
    with pytest.raises(ScheduleError, match="sink"):
        audit(inst, FleetSchedule(((Direct(0, 1),),), sched.timing))
    with pytest.raises(ScheduleError, match="timing"):
        audit(inst, FleetSchedule(sched.routes, {1: sched.timing[1]}))


def test_unassigned_task_is_an_assignment_violation(hand):
    inst, sched = hand
    legs = (Direct(0, 1), Direct(1, 3))
    rep = audit(inst, FleetSchedule((legs,), {1: sched.timing[1]}))
    assert {v.indices for v in rep.violations if v.family == "assignment"} == {(2,)}


def test_empty_instance():
    inst = generate(GenParams(R=2, K=0, M=1, seed=0))
    rep = audit(inst, FleetSchedule(((), ()), {}))
    assert rep.ok and rep.objective == 0 and rep.metrics.throughput == 0


def test_soc_trace_of_hand_schedule(hand):
    inst, sched = hand
    t, s = soc_trace(inst, 0, sched.routes[0], sched.timing)
    assert np.all(np.diff(t) >= -1e-12)
    rises = np.diff(s)[np.diff(s) > 1e-12]
    assert rises.size == 1 and rises[0] == pytest.approx(0.2)  # 20 min at 0.01 per min
    assert s.min() >= inst.robots[0].Smin
    assert s[-1] == pytest.approx(0.695 - 0.45)


def test_restricted_audit_ignores_other_robots():
    inst = generate(GenParams(R=2, K=6, M=1, seed=4))
    sched = rule_based(inst)
    frag = restrict(0, sched.routes[0], sched.timing, 2)
    rep = audit(inst, frag, robots=[0])
    assert rep.ok and rep.metrics is None


def test_family_tolerance_override(hand):
    inst, sched = hand
    t2 = sched.timing[2]
    bad = FleetSchedule(sched.routes, {**sched.timing, 2: replace(t2, start=t2.start - 0.01)})
    assert not audit(inst, bad).ok
    assert "charge_to_task" not in audit(inst, bad, family_tolerance={"charge_to_task": 0.1}).families()


@given(st.integers(0, 10**6), st.sampled_from([(0.02, 0.08), (0.1, 0.2)]))
@settings(max_examples=30)
def test_dispatch_schedules_pass_and_report_every_family(seed, energy):
    inst = generate(GenParams(R=2, K=6, M=1, seed=seed, energy=energy))
    rep = audit(inst, rule_based(inst))
    assert rep.ok, rep.summary()
    assert set(rep.worst) <= set(FAMILIES)
    assert rep.to_dict()["ok"] is True


def test_reach_charger_below_reserve(hand):
    inst, sched = hand
    # 0.4005 clears the task reserve, but the half-minute trip to the charger costs 0.001
    low = FleetSchedule(sched.routes, {**sched.timing, 1: TaskTiming(1.0, 0.0, 0.4005)})
    rep = audit(inst, low)
    hit = [v for v in rep.violations if v.family == "reach_charger"]
    assert len(hit) == 1 and hit[0].magnitude == pytest.approx(0.0005)
    assert "reserve" not in rep.families()
