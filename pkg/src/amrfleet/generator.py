"""Reproducible random instances for the warehouse experiments.

Every draw comes from a SplitMix64 stream so that an instance is a pure,
bit-exact function of its parameters.  Per task the draw order is
x, y, release, window, service, energy, tasks in id order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import Charger, DomainError, Instance, Robot, Task, WarehouseGeometry

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        x = self.state
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
        return x ^ (x >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return lo + (hi - lo) * u


@dataclass(frozen=True)
class GenParams:
    R: int = 2
    K: int = 20
    M: int = 1
    horizon: float = 480.0
    window: tuple[float, float] = (15.0, 60.0)
    service: tuple[float, float] = (2.0, 8.0)
    energy: tuple[float, float] = (0.02, 0.08)
    seed: int = 0

    def __post_init__(self):
        # K = 0 is allowed for degenerate tests
        if self.R < 1 or self.M < 1 or self.K < 0:
            raise DomainError("need R >= 1, M >= 1 and K >= 0")
        for lo, hi in (self.window, self.service, self.energy):
            if lo > hi:
                raise DomainError("range low exceeds high")
        if self.horizon / 2 + self.window[1] > self.horizon:
            raise DomainError(f"horizon must be at least {2 * self.window[1]} so that due times fit")


def charger_positions(geometry: WarehouseGeometry, M: int) -> list[tuple[float, float]]:
    """Chargers evenly spaced along the y = 0 wall."""
    return [(geometry.width_m * (m + 1) / (M + 1), 0.0) for m in range(M)]


def generate(params: GenParams, geometry: WarehouseGeometry | None = None) -> Instance:
    geometry = geometry or WarehouseGeometry()
    rng = SplitMix64(params.seed)
    half = params.horizon / 2
    tasks = []
    for k in range(1, params.K + 1):
        x = rng.uniform(0.0, geometry.width_m)
        y = rng.uniform(0.0, geometry.height_m)
        a = rng.uniform(0.0, half)
        delta = rng.uniform(*params.window)
        p = rng.uniform(*params.service)
        e = rng.uniform(*params.energy)
        tasks.append(Task(k, (x, y), a, a + delta, p, e))
    chargers = [Charger(m, pos) for m, pos in enumerate(charger_positions(geometry, params.M))]
    robots = [Robot(r) for r in range(params.R)]
    return Instance(geometry, robots, tasks, chargers, params.horizon)
