import math

import pytest

from amrfleet.domain import (
    FAST, STANDARD, Charge, Charger, Config, Direct, DomainError, FleetSchedule, Instance, Robot, ScheduleError, Task,
    TaskTiming, WarehouseGeometry, compute_metrics, empty_schedule, exact_degradation, linearized_degradation,
    objective, travel,
)
from conftest import two_task_instance


def test_manhattan_travel_at_one_meter_per_second():
    t = travel(WarehouseGeometry(), (0.0, 0.0), (40.0, 20.0))
    assert t.time == pytest.approx(1.0)
    assert t.energy == pytest.approx(0.002)


def test_points_outside_the_warehouse_are_rejected():
    with pytest.raises(DomainError):
        travel(WarehouseGeometry(), (0.0, 0.0), (101.0, 0.0))


@pytest.mark.parametrize("kw", [
    dict(release=-1.0), dict(due=-0.5, release=0.0), dict(service=0.0), dict(energy=0.0), dict(energy=1.0),
])
def test_task_invariants(kw):
    base = dict(id=1, location=(1.0, 1.0), release=0.0, due=10.0, service=1.0, energy=0.1)
    base.update(kw)
    with pytest.raises(DomainError):
        Task(**base)


@pytest.mark.parametrize("kw", [dict(S0=0.05), dict(Smin=0.9), dict(Smax=1.2), dict(idle_aging=0.0), dict(modes=())])
def test_robot_invariants(kw):
    with pytest.raises(DomainError):
        Robot(0, **kw)


def test_reference_battery_parameters():
    r = Robot(0)
    assert (r.Smax, r.Smin, r.S0, r.idle_aging) == (1.0, 0.1, 0.8, 3e-5)
    assert (STANDARD.rate, STANDARD.aging) == (0.01, 5e-5)
    assert (FAST.rate, FAST.aging) == (0.025, 1.5e-4)


def test_instance_rejects_short_horizon_and_bad_ids():
    geo = WarehouseGeometry()
    with pytest.raises(DomainError):
        Instance(geo, [Robot(0)], [Task(1, (1, 1), 0, 500, 1, 0.1)], [], 480.0)
    with pytest.raises(DomainError):
        Instance(geo, [Robot(1)], [], [], 480.0)
    with pytest.raises(DomainError):
        Instance(geo, [], [], [], 480.0)


def test_node_accessors():
    inst = two_task_instance()
    assert inst.n == 2 and inst.sink == 3
    assert inst.service(0) == 0.0 and inst.energy(0) == 0.0
    assert inst.tau(0, 1) == pytest.approx(1.0)
    assert inst.tau_charger(2, 0) == pytest.approx(1.0)
    assert inst.tau(1, 2) == inst.tau(2, 1)


def test_exact_degradation_by_hand(hand):
    inst, sched = hand
    # 5e-5 * 20 + 3e-5 * 0.697 * 10
    assert exact_degradation(inst.robots[0], sched.routes[0]) == pytest.approx(1e-3 + 2.091e-4, rel=1e-12)


def test_linearized_degradation_uses_the_auxiliary():
    leg = Charge(0, 1, 0, 1, start=0, queue=0, duration=10, wait=4, post_soc=0.5, aux=2.5)
    r = Robot(0)
    assert linearized_degradation(r, [leg]) == pytest.approx(1.5e-4 * 10 + 3e-5 * 2.5)
    assert exact_degradation(r, [leg]) == pytest.approx(1.5e-4 * 10 + 3e-5 * 2.0)


def test_objective_weights():
    inst = Instance(WarehouseGeometry(), [Robot(0), Robot(1)],
                    [Task(1, (10, 0), 0, 5, 1, 0.1), Task(2, (20, 0), 0, 5, 1, 0.1)], [Charger(0, (0, 0))], 480.0)
    a = Charge(0, 1, 0, 0, start=0, queue=3, duration=10, wait=0, post_soc=0.5)
    sched = FleetSchedule(((a, Direct(1, 3)), (Direct(0, 2), Direct(2, 3))),
                          {1: TaskTiming(12, 7, 0.5), 2: TaskTiming(1, 0, 0.7)})
    cfg = Config(lam=0.1, mu=1.0, rho=0.5)
    A = 5e-5 * 10
    assert objective(inst, sched, cfg) == pytest.approx(A + 0.1 * 3 + 7 + 0.5 * A)


def test_config_rejects_negative_weights_and_zero_partitions():
    with pytest.raises(DomainError):
        Config(mu=-1)
    with pytest.raises(DomainError):
        Config(P_S=0)


def test_charge_leg_rejects_negative_fields():
    with pytest.raises(ScheduleError):
        Charge(0, 1, 0, 0, start=0, queue=-1, duration=1, wait=0, post_soc=0.5)


def test_metrics_on_hand_schedule(hand):
    inst, sched = hand
    m = compute_metrics(inst, sched)
    assert m.throughput == 2 and m.total_tardiness == 0 and m.imbalance == 0
    assert m.total_degradation == pytest.approx(1.2091e-3)
    empty = compute_metrics(inst, empty_schedule(inst))
    assert empty.total_degradation == 0 and not math.isnan(empty.max_degradation)
