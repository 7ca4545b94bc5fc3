import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from amrfleet.domain import (  # noqa: E402
    Charge, Charger, Direct, FleetSchedule, Instance, Robot, Task, TaskTiming, WarehouseGeometry,
)

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def two_task_instance(S0=0.8):
    """Depot at the origin, one charger half a minute away, two heavy tasks."""
    geo = WarehouseGeometry()
    tasks = [Task(1, (60.0, 0.0), 0.0, 30.0, 5.0, 0.3), Task(2, (60.0, 30.0), 0.0, 200.0, 5.0, 0.45)]
    return Instance(geo, [Robot(0, S0=S0)], tasks, [Charger(0, (30.0, 0.0))], 480.0)


def two_task_schedule():
    """Serve task 1, charge 20 min at standard rate, idle 10 min, serve task 2.

    Hand trace: T1 = 1, s_in1 = 0.798; arrive at the charger at 6.5 with
    0.497; charge to 0.697 by 26.5; leave at 36.5; T2 = 37.5, s_in2 = 0.695.
    """
    legs = (Direct(0, 1), Charge(1, 2, 0, 0, start=6.5, queue=0.0, duration=20.0, wait=10.0, post_soc=0.697),
            Direct(2, 3))
    timing = {1: TaskTiming(1.0, 0.0, 0.798), 2: TaskTiming(37.5, 0.0, 0.695)}
    return FleetSchedule((legs,), timing)


@pytest.fixture
def hand():
    return two_task_instance(), two_task_schedule()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
