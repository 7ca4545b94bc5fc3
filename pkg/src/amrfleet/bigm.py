"""Big-M constants and arc elimination.

Every indicator row ``lhs >= rhs - M (1 - bin)`` is switched off by a
constant that must cover the worst case of the row over all integer-feasible
points where the binary is 0.  The tight table derives each constant from
the variable bounds the model actually imposes (start times in
``[a_k, Tmax_k]``, SOC in ``[0, Smax]``, charging variables zero when their
transition is unused).  The naive table uses one horizon-based constant for
all time rows and one for all SOC rows.

``published_direct_bigm`` and ``published_soc_bigm`` are the closed-form constants
commonly quoted for this model.  They are kept for reference and comparison
only: both can cut off feasible schedules (see the tests for counterexamples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import Config, Instance

TOL = 1e-9


def published_direct_bigm(a_i: float, p_i: float, tau: float, a_j: float, b_j: float) -> float:
    """max{0, b_j + D_j - a_i - p_i - tau} + D_j with D_j = max(0, b_j - a_j)."""
    d = max(0.0, b_j - a_j)
    return max(0.0, b_j + d - a_i - p_i - tau) + d


def published_soc_bigm(Smax: float, Smin: float, max_e: float, max_ed: float) -> float:
    return Smax - Smin + max_e + max_ed


def latest_start(instance: Instance, k: int, cap: bool = True) -> float:
    """Upper bound on T_k: the horizon, or b_k plus the window width under the tardiness cap."""
    if k == 0:
        return 0.0
    t = instance.task(k)
    if cap:
        return min(instance.horizon, t.due + t.window)
    return instance.horizon


@dataclass
class BigMTable:
    """Per-row big-M constants for one instance.

    ``kind`` is "tight" or "naive".  ``Tmax[k]`` is the start-time upper
    bound for task k (index 0 is the source, fixed at 0).  Eliminated arcs
    are (i, j) for direct transitions and (i, j, m) for charging transitions.
    """

    instance: Instance
    kind: str
    cap: bool
    Tmax: list
    M_t: float
    M_s: float
    eliminated_direct: set = field(default_factory=set)
    eliminated_charge: set = field(default_factory=set)

    # -- time ---------------------------------------------------------------

    def _fin_max(self, i):
        return self.Tmax[i] + self.instance.service(i)

    def _fin_min(self, i):
        return self.instance.release(i) + self.instance.service(i)

    def direct_time(self, i, j):
        if self.kind == "naive":
            return self.M_t
        inst = self.instance
        return max(0.0, self._fin_max(i) + inst.tau(i, j) - inst.release(j))

    def charge_start(self, i, m):
        if self.kind == "naive":
            return self.M_t
        return self._fin_max(i) + self.instance.tau_charger(i, m)

    def charge_queue(self, i, m):
        # B = 0 whenever the transition is unused, so the row holds with no slack
        return self.M_t if self.kind == "naive" else 0.0

    def charge_to_task_lb(self, m, j):
        if self.kind == "naive":
            return self.M_t
        return max(0.0, self.instance.tau_charger(j, m) - self.instance.release(j))

    def charge_to_task_ub(self, m, j):
        if self.kind == "naive":
            return self.M_t
        return max(0.0, self.Tmax[j] - self.instance.tau_charger(j, m))

    def arrival_at_charger_min(self, i, m):
        return self._fin_min(i) + self.instance.tau_charger(i, m)

    def session_end_max(self, j, m):
        """Latest B + t_c of a session feeding task j."""
        if self.kind == "naive":
            return self.instance.horizon
        return self.Tmax[j] - self.instance.tau_charger(j, m)

    def pair(self, j, m):
        return self.M_t if self.kind == "naive" else max(0.0, self.session_end_max(j, m))

    def charge_limits(self, r, i, j, m, l):
        """Upper bounds (B, q, t_c, w) of a charging transition when selected."""
        H = self.instance.horizon
        if self.kind == "naive":
            return H, H, H, H
        robot = self.instance.robots[r]
        arr = self.arrival_at_charger_min(i, m)
        bmax = self.session_end_max(j, m)
        slack = max(0.0, bmax - arr)
        cmax = min(slack, (robot.Smax - robot.Smin) / robot.modes[l].rate)
        return bmax, slack, cmax, slack

    # -- SOC ----------------------------------------------------------------

    def _e_direct(self, i, j):
        return self.instance.e_travel(self.instance.tau(i, j))

    def _e_charger(self, i, m):
        return self.instance.e_travel(self.instance.tau_charger(i, m))

    def reserve(self, r, k):
        if self.kind == "naive":
            return self.M_s
        return self.instance.robots[r].Smin + self.instance.energy(k)

    def direct_soc_lb(self, r, i, j):
        if self.kind == "naive":
            return self.M_s
        robot = self.instance.robots[r]
        if i == 0:
            return max(0.0, robot.S0 - self._e_direct(i, j))
        return max(0.0, robot.Smax - self.instance.energy(i) - self._e_direct(i, j))

    def direct_soc_ub(self, r, i, j):
        if self.kind == "naive":
            return self.M_s
        robot = self.instance.robots[r]
        if i == 0:
            return max(0.0, robot.Smax - robot.S0 + self._e_direct(i, j))
        return robot.Smax + self.instance.energy(i) + self._e_direct(i, j)

    def reach_charger(self, r, i, m):
        if self.kind == "naive":
            return self.M_s
        robot = self.instance.robots[r]
        if i == 0:
            return max(0.0, robot.Smin + self._e_charger(i, m) - robot.S0)
        return robot.Smin + self.instance.energy(i) + self._e_charger(i, m)

    def postcharge_lb(self, r, i, m):
        if self.kind == "naive":
            return self.M_s
        robot = self.instance.robots[r]
        if i == 0:
            return max(0.0, robot.S0 - self._e_charger(i, m))
        return max(0.0, robot.Smax - self.instance.energy(i) - self._e_charger(i, m))

    def postcharge_ub(self, r, i, m):
        if self.kind == "naive":
            return self.M_s
        robot = self.instance.robots[r]
        if i == 0:
            return max(0.0, self._e_charger(i, m) - robot.S0)
        return self.instance.energy(i) + self._e_charger(i, m)

    def arrival_soc_lb(self, r, m, j):
        return self.M_s if self.kind == "naive" else 0.0

    def arrival_soc_ub(self, r, m, j):
        if self.kind == "naive":
            return self.M_s
        return self.instance.robots[r].Smax + self._e_charger(j, m)


def build_bigm(instance: Instance, config: Config = Config(), kind: str = "tight") -> BigMTable:
    if kind not in ("tight", "naive"):
        raise ValueError(f"unknown big-M kind {kind!r}")
    n = instance.n
    cap = config.tardiness_cap
    Tmax = [latest_start(instance, k, cap) for k in range(n + 1)]
    H = instance.horizon
    max_p = max((t.service for t in instance.tasks), default=0.0)
    max_tau = 0.0
    max_trip = 0.0
    if n:
        tau, tau_c = instance._tables
        max_tau = float(tau.max())
        if instance.chargers:
            max_tau = max(max_tau, float(tau_c.max(axis=0).max() * 2))
            max_trip = float(tau_c.max())
    max_e = max((t.energy for t in instance.tasks), default=0.0)
    Smax = max((r.Smax for r in instance.robots), default=1.0)
    Smin = max((r.Smin for r in instance.robots), default=0.0)
    M_t = H + max_p + max_tau
    M_s = Smax + Smin + max_e + instance.e_travel(max(max_tau, max_trip))
    table = BigMTable(instance, kind, cap, Tmax, M_t, M_s)
    if kind == "tight":
        for i in range(n + 1):
            fin = instance.release(i) + instance.service(i)
            for j in range(1, n + 1):
                if i == j:
                    continue
                if fin + instance.tau(i, j) > Tmax[j] + TOL:
                    table.eliminated_direct.add((i, j))
                for m in range(len(instance.chargers)):
                    if fin + instance.tau_charger(i, m) + instance.tau_charger(j, m) > Tmax[j] + TOL:
                        table.eliminated_charge.add((i, j, m))
    return table


def tight_bigm(instance: Instance, config: Config = Config()) -> BigMTable:
    return build_bigm(instance, config, "tight")
