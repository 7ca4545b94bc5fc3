"""Instances, schedules and degradation accounting.

Units are fixed everywhere: minutes for time, SOC as a fraction of capacity
in [0, 1], and degradation as a fraction of capacity lost.

Node numbering follows the routing model: node 0 is the source (depot),
tasks are 1..n, and n + 1 is the sink, which has no location.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

SOURCE = 0


class DomainError(ValueError):
    """Invalid instance data or out-of-domain arguments."""


class ScheduleError(ValueError):
    """Structurally broken schedule (not a constraint violation)."""


Point = tuple[float, float]


@dataclass(frozen=True)
class WarehouseGeometry:
    width_m: float = 100.0
    height_m: float = 50.0
    depot: Point = (0.0, 0.0)
    speed: float = 60.0  # meters per minute
    energy_rate: float = 0.002  # SOC fraction per minute of travel

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0):
            raise DomainError("warehouse dimensions must be positive")
        if not self.speed > 0:
            raise DomainError("speed must be positive")
        if self.energy_rate < 0:
            raise DomainError("energy_rate must be nonnegative")
        self.check_point(self.depot)

    def contains(self, p: Point) -> bool:
        x, y = p
        return 0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m

    def check_point(self, p: Point):
        if not self.contains(p):
            raise DomainError(f"point {p} lies outside the {self.width_m}x{self.height_m} warehouse")


@dataclass(frozen=True)
class Travel:
    time: float
    energy: float


def travel(geometry: WarehouseGeometry, a: Point, b: Point) -> Travel:
    """Manhattan travel time (minutes) and energy (SOC fraction) from `a` to `b`."""
    geometry.check_point(a)
    geometry.check_point(b)
    dist = abs(a[0] - b[0]) + abs(a[1] - b[1])
    t = dist / geometry.speed
    return Travel(t, geometry.energy_rate * t)


@dataclass(frozen=True)
class Task:
    id: int
    location: Point
    release: float
    due: float
    service: float
    energy: float

    def __post_init__(self):
        if self.release < 0:
            raise DomainError(f"task {self.id}: negative release time")
        if self.due < self.release:
            raise DomainError(f"task {self.id}: due time before release")
        if not self.service > 0:
            raise DomainError(f"task {self.id}: service duration must be positive")
        if not 0 < self.energy < 1:
            raise DomainError(f"task {self.id}: energy must lie in (0, 1)")

    @property
    def window(self) -> float:
        """Window width b - a, reused as the tardiness cap."""
        return max(0.0, self.due - self.release)


@dataclass(frozen=True)
class ChargingMode:
    name: str
    rate: float  # SOC fraction per minute
    aging: float  # capacity-loss fraction per minute of charging

    def __post_init__(self):
        if not self.rate > 0 or not self.aging > 0:
            raise DomainError(f"charging mode {self.name!r}: rate and aging must be positive")


STANDARD = ChargingMode("standard", 0.01, 5e-5)
FAST = ChargingMode("fast", 0.025, 1.5e-4)


@dataclass(frozen=True)
class Robot:
    id: int
    S0: float = 0.8
    Smin: float = 0.1
    Smax: float = 1.0
    idle_aging: float = 3e-5  # capacity loss per (SOC * minute)
    modes: tuple[ChargingMode, ...] = (STANDARD, FAST)

    def __post_init__(self):
        if not 0 <= self.Smin < self.S0 <= self.Smax <= 1:
            raise DomainError(f"robot {self.id}: need 0 <= Smin < S0 <= Smax <= 1")
        if not self.idle_aging > 0:
            raise DomainError(f"robot {self.id}: idle aging coefficient must be positive")
        if not self.modes:
            raise DomainError(f"robot {self.id}: no charging modes")
        object.__setattr__(self, "modes", tuple(self.modes))


@dataclass(frozen=True)
class Charger:
    id: int
    position: Point


@dataclass(frozen=True)
class Instance:
    geometry: WarehouseGeometry
    robots: tuple[Robot, ...]
    tasks: tuple[Task, ...]
    chargers: tuple[Charger, ...]
    horizon: float = 480.0

    def __post_init__(self):
        for name in ("robots", "tasks", "chargers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for r, robot in enumerate(self.robots):
            if robot.id != r:
                raise DomainError(f"robot ids must be 0..R-1 in order (got {robot.id} at {r})")
        for m, ch in enumerate(self.chargers):
            if ch.id != m:
                raise DomainError(f"charger ids must be 0..M-1 in order (got {ch.id} at {m})")
            self.geometry.check_point(ch.position)
        for k, task in enumerate(self.tasks, start=1):
            if task.id != k:
                raise DomainError(f"task ids must be 1..n in order (got {task.id} at {k})")
            self.geometry.check_point(task.location)
        if not self.robots:
            raise DomainError("instance has no robots")
        if self.tasks and self.horizon < max(t.due for t in self.tasks):
            raise DomainError("horizon must be at least the latest due time")
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def sink(self) -> int:
        return len(self.tasks) + 1

    def task(self, k: int) -> Task:
        return self.tasks[k - 1]

    def position(self, node: int) -> Point:
        if node == SOURCE:
            return self.geometry.depot
        if 1 <= node <= self.n:
            return self.tasks[node - 1].location
        raise DomainError(f"node {node} has no location")

    def release(self, node: int) -> float:
        return 0.0 if node == SOURCE else self.tasks[node - 1].release

    def service(self, node: int) -> float:
        return 0.0 if node == SOURCE else self.tasks[node - 1].service

    def energy(self, node: int) -> float:
        return 0.0 if node == SOURCE else self.tasks[node - 1].energy

    @cached_property
    def _tables(self):
        pts = [self.geometry.depot] + [t.location for t in self.tasks]
        chg = [c.position for c in self.chargers]
        P = np.asarray(pts, dtype=float).reshape(-1, 2)
        C = np.asarray(chg, dtype=float).reshape(-1, 2)
        v = self.geometry.speed
        tau = np.abs(P[:, None, :] - P[None, :, :]).sum(-1) / v
        tau_pc = np.abs(P[:, None, :] - C[None, :, :]).sum(-1) / v
        return tau, tau_pc

    def tau(self, i: int, j: int) -> float:
        """Direct travel time between source/task nodes."""
        return float(self._tables[0][i, j])

    def tau_charger(self, i: int, m: int) -> float:
        """Travel time between node i and charger m (symmetric)."""
        return float(self._tables[1][i, m])

    def e_travel(self, minutes: float) -> float:
        return self.geometry.energy_rate * minutes

    def max_travel_energy(self) -> float:
        if self.n == 0:
            return 0.0
        return self.e_travel(float(self._tables[0].max()))


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Direct:
    i: int
    j: int


@dataclass(frozen=True)
class Charge:
    i: int
    j: int
    charger: int
    mode: int
    start: float
    queue: float
    duration: float
    wait: float
    post_soc: float
    aux: Optional[float] = None  # linearized s̄·w as reported by a solver

    def __post_init__(self):
        for name in ("start", "queue", "duration", "wait", "post_soc"):
            if getattr(self, name) < -1e-6:
                raise ScheduleError(f"charge leg {self.i}->{self.j}: negative {name}")

    @property
    def idle_product(self) -> float:
        return self.post_soc * self.wait

    @property
    def end(self) -> float:
        return self.start + self.duration


Leg = Union[Direct, Charge]


@dataclass(frozen=True)
class TaskTiming:
    start: float
    tardiness: float
    soc_in: float


@dataclass(frozen=True)
class FleetSchedule:
    routes: tuple[tuple[Leg, ...], ...]
    timing: dict[int, TaskTiming] = field(default_factory=dict)
    degradation: Optional[tuple[float, ...]] = None  # per robot, as reported by the producer

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))

    def assigned(self, r: int) -> list[int]:
        """Tasks served by robot r in visiting order."""
        # the final leg of a nonempty route always enters the sink
        return [leg.j for leg in self.routes[r][:-1]]

    def robot_of(self) -> dict[int, int]:
        owner = {}
        for r in range(len(self.routes)):
            for k in self.assigned(r):
                owner[k] = r
        return owner

    def charges(self):
        for r, legs in enumerate(self.routes):
            for leg in legs:
                if isinstance(leg, Charge):
                    yield r, leg


def empty_schedule(instance: Instance) -> FleetSchedule:
    return FleetSchedule(routes=tuple(() for _ in instance.robots), timing={})


# ---------------------------------------------------------------------------
# objective and metrics


@dataclass(frozen=True)
class Config:
    lam: float = 0.1
    mu: float = 1.0
    rho: float = 0.5
    P_S: int = 3
    P_W: int = 3
    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    rel_gap: float = 1e-6
    tardiness_cap: bool = True
    n_chg: Optional[int] = None  # chargers kept per arc; None means min(M, 2)
    full_gamma: bool = False
    min_charge: float = 1.0  # minutes, shortest charger reservation
    symmetry_breaking: bool = False
    idle_aging: bool = True  # ablation toggles: model-side coefficients only
    charge_aging: bool = True

    def __post_init__(self):
        if min(self.lam, self.mu, self.rho) < 0:
            raise DomainError("objective weights must be nonnegative")
        if self.P_S < 1 or self.P_W < 1:
            raise DomainError("partition counts must be at least 1")


def exact_degradation(robot: Robot, legs: Sequence[Leg]) -> float:
    """Charging wear plus idle aging at the post-charge SOC, using the exact product."""
    total = 0.0
    for leg in legs:
        if isinstance(leg, Charge):
            if not 0 <= leg.mode < len(robot.modes):
                raise DomainError(f"robot {robot.id} has no charging mode {leg.mode}")
            total += robot.modes[leg.mode].aging * leg.duration
            total += robot.idle_aging * leg.post_soc * leg.wait
    return total


def linearized_degradation(robot: Robot, legs: Sequence[Leg]) -> float:
    total = 0.0
    for leg in legs:
        if isinstance(leg, Charge):
            if not 0 <= leg.mode < len(robot.modes):
                raise DomainError(f"robot {robot.id} has no charging mode {leg.mode}")
            aux = leg.idle_product if leg.aux is None else leg.aux
            total += robot.modes[leg.mode].aging * leg.duration + robot.idle_aging * aux
    return total


def robot_degradation(instance: Instance, schedule: FleetSchedule, mode: str = "exact") -> list[float]:
    if mode == "exact":
        fn = exact_degradation
    elif mode == "linearized":
        fn = linearized_degradation
    else:
        raise ValueError(f"unknown degradation mode {mode!r}")
    return [fn(robot, legs) for robot, legs in zip(instance.robots, schedule.routes)]


def objective_value(total_deg, total_queue, total_tard, max_deg, config: Config) -> float:
    return total_deg + config.lam * total_queue + config.mu * total_tard + config.rho * max_deg


def objective(instance: Instance, schedule: FleetSchedule, config: Config, mode: str = "exact") -> float:
    A = robot_degradation(instance, schedule, mode)
    queue = sum(leg.queue for _, leg in schedule.charges())
    tard = sum(t.tardiness for t in schedule.timing.values())
    return objective_value(sum(A), queue, tard, max(A, default=0.0), config)


@dataclass(frozen=True)
class Metrics:
    total_degradation: float
    max_degradation: float
    imbalance: float
    total_tardiness: float
    throughput: int
    total_queueing: float
    solve_time: float = 0.0
    gap: Optional[float] = None


def compute_metrics(instance: Instance, schedule: FleetSchedule, solve_time: float = 0.0,
                    gap: Optional[float] = None, tol: float = 1e-6) -> Metrics:
    A = robot_degradation(instance, schedule, "exact")
    late = {k: max(0.0, t.start - instance.task(k).due) for k, t in schedule.timing.items()}
    return Metrics(
        total_degradation=float(sum(A)),
        max_degradation=float(max(A, default=0.0)),
        imbalance=float(max(A, default=0.0) - min(A, default=0.0)),
        total_tardiness=float(sum(t.tardiness for t in schedule.timing.values())),
        throughput=sum(1 for v in late.values() if v <= tol),
        total_queueing=float(sum(leg.queue for _, leg in schedule.charges())),
        solve_time=solve_time,
        gap=gap,
    )
