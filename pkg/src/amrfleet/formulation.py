"""The fleet scheduling MILP: index sets, model construction and decoding.

``build_monolithic`` writes the full model (routing, timing, SOC recursion,
shared chargers and piecewise McCormick idle aging) into a
:class:`~amrfleet.solver.MilpModel`.  ``level="master"`` reuses the same
routing and timing layer without SOC and McCormick rows, for the
matheuristic.

Charger non-overlap pairs can be emitted for every session pair, or added
lazily by :func:`solve_monolithic`, which re-solves until no two selected
sessions on a charger overlap.  The lazy loop is exact: each round solves a
relaxation, and a relaxed optimum without overlaps is feasible for the full
model.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .bigm import BigMTable, build_bigm
from .domain import (
    Charge, Config, Direct, FleetSchedule, Instance, ScheduleError, TaskTiming,
)
from .solver import MilpModel, SolveLimits, SolveResult, is_feasible_point, solve_lp, solve_milp


class EncodeError(ScheduleError):
    """A schedule uses an arc or session the model does not contain."""


class DecodeError(ScheduleError):
    pass


@dataclass(frozen=True)
class BuildOptions:
    degradation_terms: bool = True
    charger_capacity: bool = True
    bigm: str = "tight"  # tight | naive
    pairs: str = "lazy"  # lazy | all: non-overlap pairs up front or on demand
    eliminate: bool | None = None  # arc elimination; defaults to on for tight big-M
    # master level only: count charger-leg travel in the surrogate energy row and
    # bound theta below by idle aging at the least SOC a session can end with
    strong_master: bool = True

    def __post_init__(self):
        if self.bigm not in ("tight", "naive"):
            raise ValueError(f"bigm must be 'tight' or 'naive', not {self.bigm!r}")
        if self.pairs not in ("lazy", "all"):
            raise ValueError(f"pairs must be 'lazy' or 'all', not {self.pairs!r}")

    @property
    def eliminates(self) -> bool:
        return self.bigm == "tight" if self.eliminate is None else self.eliminate


# ---------------------------------------------------------------------------
# index sets


@dataclass
class IndexSets:
    """Surviving transitions.  ``gamma`` entries are (r, i, j, m, l)."""

    direct: list  # (r, i, j), j a task
    end: list  # (r, i): arc i -> sink
    gamma: list
    sessions: dict  # charger m -> list of gamma positions (the session set of m)

    def pairs(self, m):
        return list(combinations(range(len(self.sessions[m])), 2))


def build_index_sets(instance: Instance, config: Config, table: BigMTable, eliminate: bool = True) -> IndexSets:
    n, M = instance.n, len(instance.chargers)
    keep = M if config.full_gamma else min(M, 2 if config.n_chg is None else config.n_chg)
    direct, end, gamma = [], [], []
    for r, robot in enumerate(instance.robots):
        for i in range(n + 1):
            for j in range(1, n + 1):
                if i == j:
                    continue
                if not (eliminate and (i, j) in table.eliminated_direct):
                    direct.append((r, i, j))
                ok = [m for m in range(M) if not (eliminate and (i, j, m) in table.eliminated_charge)]
                ok.sort(key=lambda m: (instance.tau_charger(i, m) + instance.tau_charger(j, m), m))
                for m in sorted(ok[:keep]):
                    for l in range(len(robot.modes)):
                        gamma.append((r, i, j, m, l))
        end.extend((r, i) for i in range(1, n + 1))
    sessions = {m: [] for m in range(M)}
    for pos, (r, i, j, m, l) in enumerate(gamma):
        sessions[m].append(pos)
    return IndexSets(direct, end, gamma, sessions)


@dataclass(frozen=True)
class PartitionGrid:
    S: tuple  # ((lo, hi), ...) tiling [Smin, Smax]
    W: tuple  # tiling [0, H]

    @property
    def cells(self):
        return [(p, q) for p in range(len(self.S)) for q in range(len(self.W))]


def partition_grid(Smin: float, Smax: float, H: float, P_S: int, P_W: int) -> PartitionGrid:
    s = np.linspace(Smin, Smax, P_S + 1)
    w = np.linspace(0.0, H, P_W + 1)
    return PartitionGrid(tuple((float(s[p]), float(s[p + 1])) for p in range(P_S)),
                         tuple((float(w[q]), float(w[q + 1])) for q in range(P_W)))


def model_size(instance: Instance, config: Config = Config(), options: BuildOptions = BuildOptions()) -> dict:
    """Counts of the main index sets and binaries, with every session pair counted."""
    table = build_bigm(instance, config, options.bigm)
    sets = build_index_sets(instance, config, table, options.eliminates)
    cells = config.P_S * config.P_W
    return {
        "direct": len(sets.direct),
        "end": len(sets.end),
        "gamma": len(sets.gamma),
        "z": len(sets.gamma) * cells if options.degradation_terms else 0,
        "sessions": {m: len(v) for m, v in sets.sessions.items()},
        "pairs": sum(len(v) * (len(v) - 1) // 2 for v in sets.sessions.values()) if options.charger_capacity else 0,
    }


# ---------------------------------------------------------------------------
# McCormick


def envelope(box, s: float, w: float) -> tuple[float, float]:
    """McCormick lower/upper bounds of s*w over box (Slo, Shi, Wlo, Whi)."""
    Slo, Shi, Wlo, Whi = box
    lower = max(Slo * w + Wlo * s - Slo * Wlo, Shi * w + Whi * s - Shi * Whi)
    upper = min(Shi * w + Wlo * s - Shi * Wlo, Slo * w + Whi * s - Slo * Whi)
    return lower, upper


def mccormick_rows(model: MilpModel, box, z: int, s: int, w: int, l: int, name: str) -> list[int]:
    """Box bounds and envelope of l = s*w, all scaled by the cell selector z.

    With z = 0 every local variable is forced to zero; with z = 1 the four
    envelope rows bound l on the box.  Returns the eight row ids.
    """
    Slo, Shi, Wlo, Whi = box
    if Slo > Shi or Wlo > Whi:
        raise ValueError(f"empty McCormick box {box}")
    rows = [
        model.add_row([(s, 1.0), (z, -Slo)], ">=", 0.0, f"{name}_slo"),
        model.add_row([(s, 1.0), (z, -Shi)], "<=", 0.0, f"{name}_shi"),
        model.add_row([(w, 1.0), (z, -Wlo)], ">=", 0.0, f"{name}_wlo"),
        model.add_row([(w, 1.0), (z, -Whi)], "<=", 0.0, f"{name}_whi"),
        model.add_row([(l, 1.0), (w, -Slo), (s, -Wlo), (z, Slo * Wlo)], ">=", 0.0, f"{name}_mc1"),
        model.add_row([(l, 1.0), (w, -Shi), (s, -Whi), (z, Shi * Whi)], ">=", 0.0, f"{name}_mc2"),
        model.add_row([(l, 1.0), (w, -Shi), (s, -Wlo), (z, Shi * Wlo)], "<=", 0.0, f"{name}_mc3"),
        model.add_row([(l, 1.0), (w, -Slo), (s, -Whi), (z, Slo * Whi)], "<=", 0.0, f"{name}_mc4"),
    ]
    return rows


# ---------------------------------------------------------------------------
# model


def node_name(instance: Instance, i: int) -> str:
    if i == 0:
        return "src"
    if i == instance.sink:
        return "snk"
    return str(i)


@dataclass
class DecodeMap:
    """Variable ids by semantic role; ``role_of[v]`` inverts it."""

    x: dict = field(default_factory=dict)  # (r, k)
    y: dict = field(default_factory=dict)  # (r, i, j), j may be the sink
    g: dict = field(default_factory=dict)  # gamma tuple
    T: dict = field(default_factory=dict)  # k
    tard: dict = field(default_factory=dict)
    sin: dict = field(default_factory=dict)  # (r, k)
    B: dict = field(default_factory=dict)
    q: dict = field(default_factory=dict)
    tc: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    sbar: dict = field(default_factory=dict)
    l: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)  # (gamma, p, q)
    sp: dict = field(default_factory=dict)
    wp: dict = field(default_factory=dict)
    lp: dict = field(default_factory=dict)
    u: dict = field(default_factory=dict)  # (m, a, b) with session positions a < b
    A: dict = field(default_factory=dict)  # r
    Amax: int | None = None
    theta: dict = field(default_factory=dict)  # master only
    Theta: int | None = None
    role_of: list = field(default_factory=list)

    def register(self, role: str, key, var: int):
        if role in ("Amax", "Theta"):
            setattr(self, role, var)
        else:
            getattr(self, role)[key] = var
        assert var == len(self.role_of)
        self.role_of.append((role, key))


@dataclass
class FleetModel:
    instance: Instance
    config: Config
    options: BuildOptions
    level: str
    model: MilpModel
    dmap: DecodeMap
    sets: IndexSets
    table: BigMTable
    grids: list
    warnings: list
    pairs_added: set = field(default_factory=set)

    def add_pair(self, m: int, a: int, b: int):
        """Non-overlap rows and ordering binary for sessions a < b of charger m."""
        if (m, a, b) in self.pairs_added:
            return
        self.pairs_added.add((m, a, b))
        _pair_rows(self, m, a, b)

    def session(self, m: int, a: int):
        return self.sets.gamma[self.sets.sessions[m][a]]


def _var(fm: FleetModel, role, key, name, lb=0.0, ub=math.inf, obj=0.0, binary=False):
    v = fm.model.add_var(name, lb, ub, obj, binary)
    fm.dmap.register(role, key, v)
    return v


def _pair_rows(fm: FleetModel, m, a, b):
    table, dm = fm.table, fm.dmap
    ga, gb = fm.session(m, a), fm.session(m, b)
    u = _var(fm, "u", (m, a, b), f"u_m{m}_s{a}_s{b}", binary=True)
    Ma, Mb = table.pair(ga[2], m), table.pair(gb[2], m)
    Ba, ta, xa = dm.B[ga], dm.tc[ga], dm.g[ga]
    Bb, tb, xb = dm.B[gb], dm.tc[gb], dm.g[gb]
    # a before b when u = 1, b before a when u = 0
    fm.model.add_row([(Ba, 1), (ta, 1), (Bb, -1), (u, Ma), (xa, Ma), (xb, Ma)], "<=", 3 * Ma,
                     f"nolap1_m{m}_s{a}_s{b}")
    fm.model.add_row([(Bb, 1), (tb, 1), (Ba, -1), (u, -Mb), (xa, Mb), (xb, Mb)], "<=", 2 * Mb,
                     f"nolap2_m{m}_s{a}_s{b}")


def _reachability_warnings(instance: Instance) -> list[str]:
    out = []
    for k, task in enumerate(instance.tasks, start=1):
        ok = False
        for robot in instance.robots:
            best_in = robot.S0 - instance.e_travel(instance.tau(0, k))
            for m in range(len(instance.chargers)):
                best_in = max(best_in, robot.Smax - instance.e_travel(instance.tau_charger(k, m)))
            ok = ok or best_in - task.energy >= robot.Smin
        if not ok:
            out.append(f"task {k} cannot be served above reserve by any robot, even after a full charge")
    return out


def build_monolithic(instance: Instance, config: Config = Config(), options: BuildOptions = BuildOptions(),
                     level: str = "full") -> FleetModel:
    """Build the fleet MILP.  ``level`` is "full" or "master"."""
    if level not in ("full", "master"):
        raise ValueError(f"unknown model level {level!r}")
    table = build_bigm(instance, config, options.bigm)
    sets = build_index_sets(instance, config, table, options.eliminates)
    full = level == "full"
    degr = options.degradation_terms and full
    grids = [partition_grid(r.Smin, r.Smax, instance.horizon, config.P_S, config.P_W) for r in instance.robots]
    fm = FleetModel(instance, config, options, level, MilpModel(f"fleet_{level}"), DecodeMap(), sets, table,
                    grids, _reachability_warnings(instance))
    mdl, dm = fm.model, fm.dmap
    n, R = instance.n, len(instance.robots)
    snk = instance.sink
    nm = lambda i: node_name(instance, i)  # noqa: E731
    gname = lambda g: f"r{g[0]}_{nm(g[1])}_{nm(g[2])}_m{g[3]}_l{g[4]}"  # noqa: E731

    # --- variables -------------------------------------------------------------
    for r in range(R):
        for k in range(1, n + 1):
            _var(fm, "x", (r, k), f"x_r{r}_k{k}", binary=True)
    for (r, i, j) in sets.direct:
        _var(fm, "y", (r, i, j), f"y_r{r}_{nm(i)}_{nm(j)}", binary=True)
    for (r, i) in sets.end:
        _var(fm, "y", (r, i, snk), f"y_r{r}_{nm(i)}_snk", binary=True)
    for gam in sets.gamma:
        _var(fm, "g", gam, f"g_{gname(gam)}", binary=True)
    for k in range(1, n + 1):
        tmax = table.Tmax[k]
        _var(fm, "T", k, f"T_k{k}", 0.0, tmax)
        _var(fm, "tard", k, f"tard_k{k}", 0.0, max(0.0, tmax - instance.task(k).due), config.mu)
    if full:
        for r, robot in enumerate(instance.robots):
            for k in range(1, n + 1):
                _var(fm, "sin", (r, k), f"sin_r{r}_k{k}", 0.0, robot.Smax)
    limits = {}
    for gam in sets.gamma:
        r, i, j, m, l = gam
        robot = instance.robots[r]
        bmax, qmax, cmax, wmax = table.charge_limits(*gam)
        limits[gam] = (bmax, qmax, cmax, wmax)
        s = gname(gam)
        _var(fm, "B", gam, f"B_{s}", 0.0, bmax)
        _var(fm, "q", gam, f"q_{s}", 0.0, qmax, config.lam)
        _var(fm, "tc", gam, f"tc_{s}", 0.0, cmax)
        _var(fm, "w", gam, f"w_{s}", 0.0, wmax)
        if full:
            _var(fm, "sbar", gam, f"sbar_{s}", 0.0, robot.Smax)
        if degr:
            _var(fm, "l", gam, f"l_{s}", 0.0, robot.Smax * wmax)
            grid = grids[r]
            for p, qq in grid.cells:
                shi, whi = grid.S[p][1], grid.W[qq][1]
                key = (gam, p, qq)
                sfx = f"{s}_p{p}_q{qq}"
                _var(fm, "z", key, f"z_{sfx}", binary=True)
                _var(fm, "sp", key, f"sp_{sfx}", 0.0, shi)
                _var(fm, "wp", key, f"wp_{sfx}", 0.0, whi)
                _var(fm, "lp", key, f"lp_{sfx}", 0.0, shi * whi)
    alpha = lambda r, l: instance.robots[r].modes[l].aging if config.charge_aging else 0.0  # noqa: E731
    beta = lambda r: instance.robots[r].idle_aging if config.idle_aging else 0.0  # noqa: E731
    a_cap = {}
    for r, robot in enumerate(instance.robots):
        cap = sum(alpha(r, g[4]) * limits[g][2] + beta(r) * robot.Smax * limits[g][3]
                  for g in sets.gamma if g[0] == r)
        a_cap[r] = cap
    if degr:
        for r in range(R):
            _var(fm, "A", r, f"A_r{r}", 0.0, a_cap[r], 1.0)
        _var(fm, "Amax", None, "Amax", 0.0, max(a_cap.values(), default=0.0), config.rho)
    elif not full:
        for r in range(R):
            _var(fm, "theta", r, f"theta_r{r}", 0.0, max(a_cap[r], 0.0), 1.0)
        _var(fm, "Theta", None, "Theta", 0.0, max(a_cap.values(), default=0.0), config.rho)

    # --- routing -----------------------------------------------------------------
    into = {(r, k): [] for r in range(R) for k in range(1, n + 1)}
    out_of = {(r, k): [] for r in range(R) for k in range(1, n + 1)}
    starts = {r: [] for r in range(R)}
    ends = {r: [] for r in range(R)}
    for (r, i, j), v in dm.y.items():
        if j == snk:
            out_of[(r, i)].append(v)
            ends[r].append(v)
            continue
        into[(r, j)].append(v)
        (starts[r] if i == 0 else out_of[(r, i)]).append(v)
    for gam, v in dm.g.items():
        r, i, j = gam[:3]
        into[(r, j)].append(v)
        (starts[r] if i == 0 else out_of[(r, i)]).append(v)
    for k in range(1, n + 1):
        mdl.add_row([(dm.x[(r, k)], 1) for r in range(R)], "==", 1, f"assign_k{k}")
    for r in range(R):
        for k in range(1, n + 1):
            xv = dm.x[(r, k)]
            mdl.add_row([(v, 1) for v in into[(r, k)]] + [(xv, -1)], "==", 0, f"pred_r{r}_k{k}")
            mdl.add_row([(v, 1) for v in out_of[(r, k)]] + [(xv, -1)], "==", 0, f"succ_r{r}_k{k}")
        mdl.add_row([(v, 1) for v in starts[r]], "<=", 1, f"start_r{r}")
        mdl.add_row([(v, 1) for v in ends[r]], "<=", 1, f"end_r{r}")
        mdl.add_row([(v, 1) for v in starts[r]] + [(v, -1) for v in ends[r]], "==", 0, f"balance_r{r}")
    if config.symmetry_breaking:
        for r in range(1, R):
            if instance.robots[r] == replace(instance.robots[r - 1], id=r):
                mdl.add_row([(v, 1) for v in starts[r]] + [(v, -1) for v in starts[r - 1]], "<=", 0,
                            f"symm_r{r}")

    # --- timing ------------------------------------------------------------------
    for k in range(1, n + 1):
        task = instance.task(k)
        mdl.add_row([(dm.T[k], 1)], ">=", task.release, f"release_k{k}")
        mdl.add_row([(dm.T[k], 1), (dm.tard[k], -1)], "<=", task.due, f"due_k{k}")
    for (r, i, j) in sets.direct:
        y = dm.y[(r, i, j)]
        Mt = table.direct_time(i, j)
        lead = instance.service(i) + instance.tau(i, j)
        terms = [(dm.T[j], 1), (y, -Mt)] + ([(dm.T[i], -1)] if i else [])
        mdl.add_row(terms, ">=", lead - Mt, f"dtime_r{r}_{nm(i)}_{nm(j)}")
    for gam in sets.gamma:
        r, i, j, m, l = gam
        g, B, q, tc, w = dm.g[gam], dm.B[gam], dm.q[gam], dm.tc[gam], dm.w[gam]
        s = gname(gam)
        lead = instance.service(i) + instance.tau_charger(i, m)
        Ti = [(dm.T[i], -1)] if i else []
        M1 = table.charge_start(i, m)
        mdl.add_row([(B, 1), (g, -M1)] + Ti, ">=", lead - M1, f"cstart_{s}")
        M2 = table.charge_queue(i, m)
        mdl.add_row([(q, 1), (B, -1), (g, -M2)] + [(v, -c) for v, c in Ti], ">=", -lead - M2, f"queue_{s}")
        tf = instance.tau_charger(j, m)
        M3 = table.charge_to_task_lb(m, j)
        mdl.add_row([(dm.T[j], 1), (B, -1), (tc, -1), (w, -1), (g, -M3)], ">=", tf - M3, f"tjlb_{s}")
        M4 = table.charge_to_task_ub(m, j)
        mdl.add_row([(dm.T[j], 1), (B, -1), (tc, -1), (w, -1), (g, M4)], "<=", tf + M4, f"tjub_{s}")
        bmax, qmax, cmax, wmax = limits[gam]
        for v, cap, tag in ((B, bmax, "B"), (q, qmax, "q"), (tc, cmax, "tc"), (w, wmax, "w")):
            mdl.add_row([(v, 1), (g, -cap)], "<=", 0, f"act{tag}_{s}")
        if not full:
            mdl.add_row([(tc, 1), (g, -config.min_charge)], ">=", 0, f"minchg_{s}")

    # --- SOC -----------------------------------------------------------------------
    if full:
        for r, robot in enumerate(instance.robots):
            for k in range(1, n + 1):
                sv, xv = dm.sin[(r, k)], dm.x[(r, k)]
                mdl.add_row([(sv, 1), (xv, -robot.Smax)], "<=", 0, f"socx_r{r}_k{k}")
                Mr = table.reserve(r, k)
                mdl.add_row([(sv, 1), (xv, -Mr)], ">=", robot.Smin + instance.energy(k) - Mr, f"reserve_r{r}_k{k}")
        for (r, i, j) in sets.direct:
            robot = instance.robots[r]
            y = dm.y[(r, i, j)]
            drop = instance.energy(i) + instance.e_travel(instance.tau(i, j))
            si = [(dm.sin[(r, i)], -1)] if i else []
            base = 0.0 if i else robot.S0
            sfx = f"r{r}_{nm(i)}_{nm(j)}"
            M1 = table.direct_soc_lb(r, i, j)
            mdl.add_row([(dm.sin[(r, j)], 1), (y, -M1)] + si, ">=", base - drop - M1, f"dsoclb_{sfx}")
            M2 = table.direct_soc_ub(r, i, j)
            mdl.add_row([(dm.sin[(r, j)], 1), (y, M2)] + si, "<=", base - drop + M2, f"dsocub_{sfx}")
        for gam in sets.gamma:
            r, i, j, m, l = gam
            robot = instance.robots[r]
            g, tc, sb = dm.g[gam], dm.tc[gam], dm.sbar[gam]
            s = gname(gam)
            at_chg = instance.energy(i) + instance.e_travel(instance.tau_charger(i, m))
            si = [(dm.sin[(r, i)], 1)] if i else []
            base = 0.0 if i else robot.S0
            M1 = table.reach_charger(r, i, m)
            mdl.add_row(si + [(g, -M1)], ">=", robot.Smin + at_chg - base - M1, f"reach_{s}")
            mdl.add_row([(sb, 1), (g, -robot.Smax)], "<=", 0, f"sbarx_{s}")
            c = robot.modes[l].rate
            neg_si = [(v, -a) for v, a in si]
            M2 = table.postcharge_lb(r, i, m)
            mdl.add_row([(sb, 1), (tc, -c), (g, -M2)] + neg_si, ">=", base - at_chg - M2, f"pclb_{s}")
            M3 = table.postcharge_ub(r, i, m)
            mdl.add_row([(sb, 1), (tc, -c), (g, M3)] + neg_si, "<=", base - at_chg + M3, f"pcub_{s}")
            ef = instance.e_travel(instance.tau_charger(j, m))
            M4 = table.arrival_soc_lb(r, m, j)
            mdl.add_row([(dm.sin[(r, j)], 1), (sb, -1), (g, -M4)], ">=", -ef - M4, f"arrlb_{s}")
            M5 = table.arrival_soc_ub(r, m, j)
            mdl.add_row([(dm.sin[(r, j)], 1), (sb, -1), (g, M5)], "<=", -ef + M5, f"arrub_{s}")

    # --- degradation ---------------------------------------------------------------
    if degr:
        for gam in sets.gamma:
            r = gam[0]
            grid = grids[r]
            s = gname(gam)
            cells = grid.cells
            zs = [dm.z[(gam, p, qq)] for p, qq in cells]
            mdl.add_row([(v, 1) for v in zs] + [(dm.g[gam], -1)], "==", 0, f"psel_{s}")
            for role, agg in (("sp", dm.sbar), ("wp", dm.w), ("lp", dm.l)):
                parts = [getattr(dm, role)[(gam, p, qq)] for p, qq in cells]
                mdl.add_row([(v, 1) for v in parts] + [(agg[gam], -1)], "==", 0, f"agg{role[0]}_{s}")
            for p, qq in cells:
                key = (gam, p, qq)
                box = (*grid.S[p], *grid.W[qq])
                mccormick_rows(mdl, box, dm.z[key], dm.sp[key], dm.wp[key], dm.lp[key], f"mc_{s}_p{p}_q{qq}")
        for r in range(R):
            terms = [(dm.A[r], 1)]
            for gam in sets.gamma:
                if gam[0] == r:
                    terms += [(dm.tc[gam], -alpha(r, gam[4])), (dm.l[gam], -beta(r))]
            mdl.add_row(terms, "==", 0, f"deg_r{r}")
            mdl.add_row([(dm.A[r], 1), (dm.Amax, -1)], "<=", 0, f"maxdeg_r{r}")
    if not full:
        for r, robot in enumerate(instance.robots):
            mdl.add_row([(dm.theta[r], 1), (dm.Theta, -1)], "<=", 0, f"maxtheta_r{r}")
            # theta also covers the charging wear the master can see
            mine = [g for g in sets.gamma if g[0] == r]
            if mine:
                terms = [(dm.theta[r], 1)] + [(dm.tc[g], -alpha(r, g[4])) for g in mine]
                if options.strong_master:
                    # a session feeding j ends with at least Smin + e_j + e_from
                    terms += [(dm.w[g], -beta(r) * (robot.Smin + instance.energy(g[2])
                                                    + instance.e_travel(instance.tau_charger(g[2], g[3]))))
                              for g in mine]
                mdl.add_row(terms, ">=", 0, f"thetachg_r{r}")
            terms = [(dm.x[(r, k)], instance.energy(k)) for k in range(1, n + 1)]
            terms += [(dm.y[(rr, i, j)], instance.e_travel(instance.tau(i, j)))
                      for (rr, i, j) in sets.direct if rr == r]
            terms += [(dm.tc[g], -robot.modes[g[4]].rate) for g in mine]
            if options.strong_master:
                terms += [(dm.g[g], instance.e_travel(instance.tau_charger(g[1], g[3])
                                                      + instance.tau_charger(g[2], g[3]))) for g in mine]
            mdl.add_row(terms, "<=", robot.S0 - robot.Smin, f"energy_r{r}")

    if options.charger_capacity and options.pairs == "all":
        for m in sets.sessions:
            for a, b in sets.pairs(m):
                fm.add_pair(m, a, b)
    return fm


# ---------------------------------------------------------------------------
# decoding


def _chain(fm: FleetModel, vals, r: int):
    """Follow rounded y/g arcs of robot r from the source; returns the arcs in order."""
    inst, dm = fm.instance, fm.dmap
    succ = {}
    for (rr, i, j), v in dm.y.items():
        if rr == r and vals[v] > 0.5:
            if i in succ:
                raise DecodeError(f"robot {r}: node {i} has two successors")
            succ[i] = ("y", (rr, i, j))
    for gam, v in dm.g.items():
        if gam[0] == r and vals[v] > 0.5:
            if gam[1] in succ:
                raise DecodeError(f"robot {r}: node {gam[1]} has two successors")
            succ[gam[1]] = ("g", gam)
    if not succ:
        return []
    arcs, node, seen = [], 0, set()
    while node != inst.sink:
        if node not in succ:
            raise DecodeError(f"robot {r}: route breaks at node {node}")
        if node in seen:
            raise DecodeError(f"robot {r}: route revisits node {node}")
        seen.add(node)
        kind, key = succ[node]
        arcs.append((kind, key))
        node = key[2]
    if len(arcs) != len(succ):
        raise DecodeError(f"robot {r}: arcs outside the route from the source (subtour)")
    return arcs


def decode_solution(fm: FleetModel, values) -> FleetSchedule:
    """Rebuild a schedule from a full-model solution vector.

    Queue and tardiness are normalized to their implied values
    (q = B - arrival at the charger, tard = max(0, T - b)); the solver's
    idle-aging auxiliary is kept on each charge leg next to the exact product.
    """
    if fm.level != "full":
        raise ValueError("decode_solution needs a full model")
    inst, dm = fm.instance, fm.dmap
    vals = np.asarray(values, dtype=float)
    routes, timing, degr = [], {}, []
    for r, robot in enumerate(inst.robots):
        legs = []
        for kind, key in _chain(fm, vals, r):
            if kind == "y":
                legs.append(Direct(key[1], key[2]))
                continue
            gam = key
            if dm.z:
                zsum = sum(vals[dm.z[(gam, p, q)]] for p, q in fm.grids[r].cells)
                if abs(zsum - 1.0) > 0.5:
                    raise DecodeError(f"robot {r}: charging transition {gam[1:]} selects no partition cell")
            _, i, j, m, l = gam
            Ti = vals[dm.T[i]] if i else 0.0
            arrival = Ti + inst.service(i) + inst.tau_charger(i, m)
            B = float(vals[dm.B[gam]])
            tc = max(0.0, float(vals[dm.tc[gam]]))
            w = max(0.0, float(vals[dm.w[gam]]))
            legs.append(Charge(i, j, m, l, start=B, queue=max(0.0, B - arrival), duration=tc, wait=w,
                               post_soc=max(0.0, float(vals[dm.sbar[gam]])),
                               aux=float(vals[dm.l[gam]]) if gam in dm.l else None))
        for leg in legs[:-1] if legs else []:
            k = leg.j
            T = float(vals[dm.T[k]])
            timing[k] = TaskTiming(T, max(0.0, T - inst.task(k).due), float(vals[dm.sin[(r, k)]]))
        routes.append(tuple(legs))
        degr.append(float(vals[dm.A[r]]) if r in dm.A else None)
    for k in range(1, inst.n + 1):
        if k not in timing:
            raise DecodeError(f"task {k} is not on any route")
    return FleetSchedule(tuple(routes), timing, tuple(degr) if dm.A else None)


def encode_schedule(fm: FleetModel, sched: FleetSchedule) -> np.ndarray:
    """Full-model value vector representing `sched`.

    Idle aging is encoded as l = s_bar * w in the partition cell containing
    the point, so the vector is feasible whenever the schedule is and the
    model is valid.  Ordering binaries follow session start times.  Raises
    :class:`EncodeError` when the schedule uses an arc the model lacks.
    """
    inst, dm = fm.instance, fm.dmap
    v = np.zeros(fm.model.n_vars)
    A = []
    for r, legs in enumerate(sched.routes):
        rb = inst.robots[r]
        a_r = 0.0
        for k in sched.assigned(r):
            v[dm.x[(r, k)]] = 1
            if (r, k) in dm.sin:
                v[dm.sin[(r, k)]] = sched.timing[k].soc_in
        for leg in legs:
            if not isinstance(leg, Charge):
                key = (r, leg.i, leg.j)
                if key not in dm.y:
                    raise EncodeError(f"robot {r}: arc {key[1:]} is not in the model")
                v[dm.y[key]] = 1
                continue
            gam = (r, leg.i, leg.j, leg.charger, leg.mode)
            if gam not in dm.g:
                raise EncodeError(f"robot {r}: charging transition {gam[1:]} is not in the model")
            v[dm.g[gam]] = 1
            for role, val in (("B", leg.start), ("q", leg.queue), ("tc", leg.duration), ("w", leg.wait)):
                v[getattr(dm, role)[gam]] = val
            a_r += rb.modes[leg.mode].aging * leg.duration
            if gam in dm.sbar:
                v[dm.sbar[gam]] = leg.post_soc
            if gam in dm.l:
                prod = leg.post_soc * leg.wait
                v[dm.l[gam]] = prod
                a_r += rb.idle_aging * prod
                grid = fm.grids[r]
                p = next(i for i, (lo, hi) in enumerate(grid.S) if lo - 1e-12 <= leg.post_soc <= hi + 1e-12)
                q = next(i for i, (lo, hi) in enumerate(grid.W) if lo - 1e-12 <= leg.wait <= hi + 1e-12)
                key = (gam, p, q)
                v[dm.z[key]], v[dm.sp[key]], v[dm.wp[key]], v[dm.lp[key]] = 1, leg.post_soc, leg.wait, prod
        A.append(a_r)
    for k, t in sched.timing.items():
        v[dm.T[k]] = t.start
        v[dm.tard[k]] = t.tardiness
    for r, a_r in enumerate(A):
        if r in dm.A:
            v[dm.A[r]] = a_r
    if dm.Amax is not None:
        v[dm.Amax] = max(A, default=0.0)
    for (m, a, b), u in dm.u.items():
        v[u] = 1.0 if v[dm.B[fm.session(m, a)]] <= v[dm.B[fm.session(m, b)]] else 0.0
    return v


# ---------------------------------------------------------------------------
# solving


def overlapping_sessions(fm: FleetModel, vals, tol: float = 1e-6):
    """Pairs (m, a, b) of selected sessions on one charger whose intervals overlap."""
    dm = fm.dmap
    found = []
    for m, members in fm.sets.sessions.items():
        active = []
        for a, pos in enumerate(members):
            gam = fm.sets.gamma[pos]
            if vals[dm.g[gam]] > 0.5:
                B = vals[dm.B[gam]]
                active.append((a, B, B + vals[dm.tc[gam]]))
        for (a, s1, e1), (b, s2, e2) in combinations(active, 2):
            if min(e1, e2) - max(s1, s2) > tol:
                found.append((m, a, b))
    return found


@dataclass
class MonolithicResult:
    status: str
    schedule: FleetSchedule | None
    result: SolveResult
    fleet_model: FleetModel
    rounds: int
    wall_time: float

    @property
    def objective(self):
        return self.result.objective


def solve_fleet_model(fm: FleetModel, limits: SolveLimits = SolveLimits(), engine: str = "auto",
                      fixed_lb=None, fixed_ub=None, warm_start: FleetSchedule | None = None):
    """Branch-and-bound with lazily generated non-overlap pairs.

    Returns (SolveResult, rounds).  Variable-bound overrides apply to the
    variables existing at call time; later ordering binaries keep [0, 1].
    A feasible `warm_start` schedule seeds every round's incumbent and is
    returned if the budget runs out before anything better is proven
    executable.
    """
    t0 = time.perf_counter()
    rounds = 0
    while True:
        rounds += 1
        left = limits.time_limit - (time.perf_counter() - t0)
        if left <= 0:
            return SolveResult("limit", wall_time=time.perf_counter() - t0), rounds
        lb = ub = None
        if fixed_lb is not None:
            extra = fm.model.n_vars - len(fixed_lb)
            lb = np.concatenate([fixed_lb, np.zeros(extra)])
            ub = np.concatenate([fixed_ub, np.ones(extra)])
        warm = None
        if warm_start is not None:
            try:
                warm = encode_schedule(fm, warm_start)
            except EncodeError:
                warm_start = None
        res = solve_milp(fm.model, replace(limits, time_limit=left), engine, lb, ub, initial=warm)
        res.wall_time = time.perf_counter() - t0
        if not res.has_solution or not fm.options.charger_capacity:
            return res, rounds
        clashes = overlapping_sessions(fm, res.values, fm.config.feas_tol)
        if not clashes:
            return res, rounds
        if res.status != "optimal":
            # out of budget: the incumbent is not executable; fall back to the warm start if it is valid
            cm = fm.model.compile()
            if warm is not None and is_feasible_point(cm, warm, lb, ub, limits.int_tol):
                obj = float(cm.c @ warm) + cm.obj_const
                gap = max(0.0, obj - res.bound) / max(abs(obj), 1e-6)
                return SolveResult("feasible", obj, res.bound, warm, gap, res.nodes, res.wall_time,
                                   res.lp_solves), rounds
            return SolveResult("limit", bound=res.bound, nodes=res.nodes, wall_time=res.wall_time), rounds
        involved = set()
        for m, a, b in clashes:
            involved.update({(m, a), (m, b)})
        # add every pair among the sessions involved, so one round resolves chains of clashes
        for m in fm.sets.sessions:
            ids = sorted(a for mm, a in involved if mm == m)
            for a, b in combinations(ids, 2):
                fm.add_pair(m, a, b)


def solve_monolithic(instance: Instance, config: Config = Config(), options: BuildOptions = BuildOptions(),
                     limits: SolveLimits = SolveLimits(), engine: str = "auto",
                     warm_start: FleetSchedule | None = None) -> MonolithicResult:
    t0 = time.perf_counter()
    fm = build_monolithic(instance, config, options)
    res, rounds = solve_fleet_model(fm, limits, engine, warm_start=warm_start)
    schedule = decode_solution(fm, res.values) if res.has_solution else None
    return MonolithicResult(res.status, schedule, res, fm, rounds, time.perf_counter() - t0)


def lp_bound(instance: Instance, config: Config = Config(), options: BuildOptions = BuildOptions(),
             engine: str = "highs") -> float:
    """Optimum of the LP relaxation of the full model (non-overlap pairs excluded)."""
    fm = build_monolithic(instance, config, replace(options, pairs="lazy"))
    res = solve_lp(fm.model, engine=engine)
    return res.objective
