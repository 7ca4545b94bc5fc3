"""Hierarchical matheuristic: fleet master, route-conditioned robot subproblems, cuts.

The master keeps assignment, sequencing, charger/mode choice, charger
ordering and coarse timing, with a surrogate energy row in place of the SOC
recursion and a per-robot degradation estimate ``theta_r``.  Each robot's
selected route-and-charging pattern is then scheduled exactly (timing, SOC,
piecewise McCormick idle aging) by a small subproblem.  Feasible patterns
return their degradation as a pattern-cost cut on ``theta_r``; infeasible
ones are excluded by a no-good cut.

Charger orderings couple robots.  A subproblem sees the other robots'
sessions through fixed separators taken from the master: if session a
precedes session b on a charger, a must end by b's master start and b may
not start before it.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .audit import audit
from .bigm import latest_start
from .baselines import DispatchPolicy, InfeasibleTaskError, fifo_repair, rule_based
from .domain import (
    Charge, Config, Direct, FleetSchedule, Instance, TaskTiming, robot_degradation,
)
from .formulation import (
    BuildOptions, FleetModel, _chain, build_monolithic, mccormick_rows, partition_grid, solve_fleet_model,
)
from .solver import MilpModel, SolveLimits, solve_lp, solve_milp

TOL = 1e-9


@dataclass(frozen=True)
class Pattern:
    """A robot's route as a chain of arcs from the source to the sink.

    Each arc is ("y", (i, j)) for a direct transition (j may be the sink) or
    ("g", (i, j, m, l)) for a charging transition.
    """

    robot: int
    arcs: tuple

    @property
    def direct(self):
        return tuple(key for kind, key in self.arcs if kind == "y")

    @property
    def charges(self):
        return tuple(key for kind, key in self.arcs if kind == "g")

    @property
    def N(self) -> int:
        return len(self.arcs)

    @property
    def tasks(self):
        return [key[1] for _, key in self.arcs[:-1]]

    def to_dict(self):
        return {"robot": self.robot, "direct": [list(a) for a in self.direct],
                "charges": [list(c) for c in self.charges]}


@dataclass(frozen=True)
class Precedence:
    session: tuple  # (i, j, m, l) of the subproblem's own robot
    kind: str  # "end_by": B + t_c <= time; "start_after": B >= time
    time: float


@dataclass(frozen=True)
class Cut:
    kind: str  # "opt" | "nogood"
    pattern: Pattern
    A: float = 0.0
    M_theta: float = 0.0


@dataclass
class SubproblemResult:
    status: str  # feasible | infeasible
    A: float = math.inf  # exact degradation of the fragment
    objective: float = math.inf  # subproblem objective value (linearized)
    legs: tuple = ()
    timing: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)  # charge arc -> (p, q)
    lp_solves: int = 0
    bound_lps: int = 0


@dataclass
class MasterModel:
    fm: FleetModel
    cuts: list = field(default_factory=list)
    M_theta: float = 0.0


def theta_big_m(instance: Instance) -> float:
    """Upper bound on one robot's degradation: every task preceded by a maximal charge."""
    H = instance.horizon
    per = max((max(md.aging for md in rb.modes) * H + rb.idle_aging * rb.Smax * H for rb in instance.robots),
              default=0.0)
    return max(1, instance.n) * per


def build_master(instance: Instance, config: Config = Config(), bigm: str = "tight",
                 strong: bool = True, charger_capacity: bool = True) -> MasterModel:
    """Master MILP; `strong` adds charger-leg travel and idle aging to the surrogates."""
    options = BuildOptions(bigm=bigm, strong_master=strong, charger_capacity=charger_capacity)
    fm = build_monolithic(instance, config, options, level="master")
    return MasterModel(fm, [], theta_big_m(instance))


def _pattern_vars(master: MasterModel, pattern: Pattern):
    dm, r = master.fm.dmap, pattern.robot
    out = []
    for kind, key in pattern.arcs:
        out.append(dm.y[(r, *key)] if kind == "y" else dm.g[(r, *key)])
    return out


def make_cut(pattern: Pattern, result: SubproblemResult, M_theta: float) -> Cut:
    if result.status == "feasible":
        return Cut("opt", pattern, max(0.0, result.A), M_theta)
    return Cut("nogood", pattern)


def add_cut(master: MasterModel, cut: Cut) -> int:
    mdl, r = master.fm.model, cut.pattern.robot
    vs = _pattern_vars(master, cut.pattern)
    n = len(master.cuts)
    master.cuts.append(cut)
    if cut.kind == "opt":
        theta = master.fm.dmap.theta[r]
        return mdl.add_row([(theta, 1.0)] + [(v, -cut.M_theta) for v in vs], ">=",
                           cut.A - cut.M_theta * cut.pattern.N, f"optcut{n}_r{r}")
    return mdl.add_row([(v, 1.0) for v in vs], "<=", cut.pattern.N - 1, f"nogood{n}_r{r}")


def cut_rhs(cut: Cut, pattern: Pattern) -> float:
    """Right-hand side of an optimality cut on theta when the master selects `pattern`."""
    mine = set(cut.pattern.arcs)
    hit = sum(1 for a in pattern.arcs if a in mine) if pattern.robot == cut.pattern.robot else 0
    return cut.A - cut.M_theta * (cut.pattern.N - hit)


def extract_patterns(master: MasterModel, values) -> tuple[dict, dict]:
    """Per-robot patterns and charger precedences from a master solution."""
    fm = master.fm
    vals = np.asarray(values)
    patterns = {}
    for r in range(len(fm.instance.robots)):
        arcs = []
        for kind, key in _chain(fm, vals, r):
            arcs.append((kind, tuple(key[1:])))
        patterns[r] = Pattern(r, tuple(arcs))
    precs = {r: [] for r in patterns}
    dm = fm.dmap
    by_charger = {}
    for r, pat in patterns.items():
        for (i, j, m, l) in pat.charges:
            gam = (r, i, j, m, l)
            by_charger.setdefault(m, []).append((float(vals[dm.B[gam]]), r, (i, j, m, l)))
    for m, items in by_charger.items():
        items.sort()
        for (Ba, ra, sa), (Bb, rb, sb) in itertools.combinations(items, 2):
            if ra == rb:
                continue
            precs[ra].append(Precedence(sa, "end_by", Bb))
            precs[rb].append(Precedence(sb, "start_after", Bb))
    return patterns, precs


# ---------------------------------------------------------------------------
# subproblem


@dataclass
class SubModel:
    model: MilpModel
    pattern: Pattern
    T: dict
    tard: dict
    sin: dict
    charge_vars: dict  # (i, j, m, l) -> dict of var ids
    z: dict  # (i, j, m, l) -> list of ((p, q), var)
    trivially_infeasible: bool = False

    @property
    def n_binaries(self):
        return self.model.n_binaries


def build_subproblem(instance: Instance, robot: int, pattern: Pattern, precedences=(),
                     config: Config = Config(), include_queue: bool = True) -> SubModel:
    """Exact timing/SOC/McCormick model of one robot's fixed pattern.

    All routing decisions are fixed, so no big-M constants appear; the only
    binaries are the partition selectors of the charging transitions.  With
    `include_queue` the charger waiting is priced at lambda as in the fleet
    objective; without it the subproblem is free to start sessions late to
    shorten post-charge idling, which can cost more in queueing than it saves.
    """
    rb = instance.robots[robot]
    H = instance.horizon
    grid = partition_grid(rb.Smin, rb.Smax, H, config.P_S, config.P_W)
    mdl = MilpModel(f"sub_r{robot}")
    sm = SubModel(mdl, pattern, {}, {}, {}, {}, {})
    alpha = lambda l: rb.modes[l].aging if config.charge_aging else 0.0  # noqa: E731
    beta = rb.idle_aging if config.idle_aging else 0.0
    for k in pattern.tasks:
        task = instance.task(k)
        tmax = latest_start(instance, k, config.tardiness_cap)
        sm.T[k] = mdl.add_var(f"T_k{k}", 0.0, tmax)
        sm.tard[k] = mdl.add_var(f"tard_k{k}", 0.0, max(0.0, tmax - task.due), config.mu)
        sm.sin[k] = mdl.add_var(f"sin_k{k}", 0.0, rb.Smax)
        mdl.add_row([(sm.T[k], 1)], ">=", task.release, f"release_k{k}")
        mdl.add_row([(sm.T[k], 1), (sm.tard[k], -1)], "<=", task.due, f"due_k{k}")
        mdl.add_row([(sm.sin[k], 1)], ">=", rb.Smin + task.energy, f"reserve_k{k}")
    for kind, key in pattern.arcs:
        i, j = key[0], key[1]
        if j == instance.sink:
            continue
        Ti = [(sm.T[i], -1.0)] if i else []
        si = [(sm.sin[i], -1.0)] if i else []
        base = 0.0 if i else rb.S0
        if kind == "y":
            mdl.add_row([(sm.T[j], 1)] + Ti, ">=", instance.service(i) + instance.tau(i, j), f"dtime_{i}_{j}")
            drop = instance.energy(i) + instance.e_travel(instance.tau(i, j))
            mdl.add_row([(sm.sin[j], 1)] + si, "==", base - drop, f"dsoc_{i}_{j}")
            continue
        _, _, m, l = key
        mode = rb.modes[l]
        tag = f"{i}_{j}_m{m}_l{l}"
        v = {
            "B": mdl.add_var(f"B_{tag}", 0.0, H),
            "q": mdl.add_var(f"q_{tag}", 0.0, H, config.lam if include_queue else 0.0),
            "tc": mdl.add_var(f"tc_{tag}", 0.0, min(H, (rb.Smax - rb.Smin) / mode.rate), alpha(l)),
            "w": mdl.add_var(f"w_{tag}", 0.0, H),
            "sbar": mdl.add_var(f"sbar_{tag}", 0.0, rb.Smax),
            "l": mdl.add_var(f"l_{tag}", 0.0, rb.Smax * H, beta),
        }
        sm.charge_vars[key] = v
        lead = instance.service(i) + instance.tau_charger(i, m)
        mdl.add_row([(v["B"], 1)] + Ti, ">=", lead, f"cstart_{tag}")
        mdl.add_row([(v["q"], 1), (v["B"], -1)] + [(x, -c) for x, c in Ti], ">=", -lead, f"queue_{tag}")
        tf = instance.tau_charger(j, m)
        mdl.add_row([(sm.T[j], 1), (v["B"], -1), (v["tc"], -1), (v["w"], -1)], "==", tf, f"tj_{tag}")
        mdl.add_row([(v["tc"], 1)], ">=", config.min_charge, f"minchg_{tag}")
        at_chg = instance.energy(i) + instance.e_travel(instance.tau_charger(i, m))
        if i:
            mdl.add_row([(sm.sin[i], 1)], ">=", rb.Smin + at_chg, f"reach_{tag}")
        elif rb.S0 - at_chg < rb.Smin - TOL:
            sm.trivially_infeasible = True
        mdl.add_row([(v["sbar"], 1), (v["tc"], -mode.rate)] + si, "==", base - at_chg, f"pc_{tag}")
        mdl.add_row([(sm.sin[j], 1), (v["sbar"], -1)], "==", -instance.e_travel(tf), f"arr_{tag}")
        zs = []
        agg = {"sp": [], "wp": [], "lp": []}
        for p, qq in grid.cells:
            (slo, shi), (wlo, whi) = grid.S[p], grid.W[qq]
            z = mdl.add_var(f"z_{tag}_p{p}_q{qq}", binary=True)
            sp = mdl.add_var(f"sp_{tag}_p{p}_q{qq}", 0.0, shi)
            wp = mdl.add_var(f"wp_{tag}_p{p}_q{qq}", 0.0, whi)
            lp = mdl.add_var(f"lp_{tag}_p{p}_q{qq}", 0.0, shi * whi)
            mccormick_rows(mdl, (slo, shi, wlo, whi), z, sp, wp, lp, f"mc_{tag}_p{p}_q{qq}")
            zs.append(((p, qq), z))
            agg["sp"].append(sp)
            agg["wp"].append(wp)
            agg["lp"].append(lp)
        sm.z[key] = zs
        mdl.add_row([(z, 1) for _, z in zs], "==", 1, f"psel_{tag}")
        for role, target in (("sp", "sbar"), ("wp", "w"), ("lp", "l")):
            mdl.add_row([(x, 1) for x in agg[role]] + [(v[target], -1)], "==", 0, f"agg{role[0]}_{tag}")
    for prec in precedences:
        v = sm.charge_vars[prec.session]
        if prec.kind == "end_by":
            mdl.add_row([(v["B"], 1), (v["tc"], 1)], "<=", prec.time, f"endby_{prec.session}")
        else:
            mdl.add_row([(v["B"], 1)], ">=", prec.time, f"after_{prec.session}")
    return sm


def _fragment(instance: Instance, robot: int, sm: SubModel, x) -> SubproblemResult:
    rb = instance.robots[robot]
    legs, timing, cells = [], {}, {}
    for kind, key in sm.pattern.arcs:
        i, j = key[0], key[1]
        if kind == "y":
            legs.append(Direct(i, j))
            continue
        _, _, m, l = key
        v = sm.charge_vars[key]
        Ti = x[sm.T[i]] if i else 0.0
        arrive = Ti + instance.service(i) + instance.tau_charger(i, m)
        B = float(x[v["B"]])
        legs.append(Charge(i, j, m, l, start=B, queue=max(0.0, B - arrive), duration=max(0.0, float(x[v["tc"]])),
                           wait=max(0.0, float(x[v["w"]])), post_soc=max(0.0, float(x[v["sbar"]])),
                           aux=float(x[v["l"]])))
        cells[key] = next(cell for cell, z in sm.z[key] if x[z] > 0.5)
    for k in sm.pattern.tasks:
        T = float(x[sm.T[k]])
        timing[k] = TaskTiming(T, max(0.0, T - instance.task(k).due), float(x[sm.sin[k]]))
    A = sum(rb.modes[g.mode].aging * g.duration + rb.idle_aging * g.idle_product
            for g in legs if isinstance(g, Charge))
    return SubproblemResult("feasible", A, 0.0, tuple(legs), timing, cells)


def solve_subproblem(instance: Instance, robot: int, sm: SubModel, strategy: str = "enumerate",
                     engine: str = "auto", limits: SolveLimits = SolveLimits(time_limit=60.0)) -> SubproblemResult:
    """Solve a subproblem by cell enumeration or by branch-and-bound.

    Enumeration first bounds every (transition, cell) choice by an LP in
    which only that transition's cell is fixed; full cell combinations are
    then solved in order of their bound until the bound reaches the best
    value found.
    """
    if strategy not in ("enumerate", "milp"):
        raise ValueError(f"unknown subproblem strategy {strategy!r}")
    if sm.trivially_infeasible:
        return SubproblemResult("infeasible")
    mdl = sm.model
    if strategy == "milp":
        res = solve_milp(mdl, limits, engine)
        if not res.has_solution:
            return SubproblemResult("infeasible", lp_solves=res.lp_solves)
        out = _fragment(instance, robot, sm, res.values)
        out.objective, out.lp_solves = res.objective, res.lp_solves
        return out
    cm = mdl.compile()
    lb0, ub0 = cm.lb.copy(), cm.ub.copy()
    keys = list(sm.z)
    solves = 0

    def fixed(choice):
        lb, ub = lb0.copy(), ub0.copy()
        for key, cell in choice.items():
            for c, z in sm.z[key]:
                lb[z] = ub[z] = 1.0 if c == cell else 0.0
        return lb, ub

    def lp(choice):
        nonlocal solves
        solves += 1
        lb, ub = fixed(choice)
        res = solve_lp(mdl, lb, ub, engine)
        return (res.objective, res.values) if res.status == "optimal" else (math.inf, None)

    if not keys:
        val, x = lp({})
        if x is None:
            return SubproblemResult("infeasible", lp_solves=solves)
        out = _fragment(instance, robot, sm, x)
        out.objective, out.lp_solves = val, solves
        return out
    bounds = {key: {} for key in keys}
    cache = {}
    for key in keys:
        for cell, _ in sm.z[key]:
            val, x = lp({key: cell})
            bounds[key][cell] = val
            if len(keys) == 1:
                cache[(cell,)] = (val, x)
    n_bound = solves if len(keys) > 1 else 0
    choices = [[c for c, v in bounds[key].items() if v < math.inf] for key in keys]
    combos = []
    for combo in itertools.product(*choices):
        combos.append((max(bounds[key][c] for key, c in zip(keys, combo)), combo))
    combos.sort()
    best, best_x = math.inf, None
    for lbv, combo in combos:
        if lbv >= best - max(1e-9, 1e-9 * abs(best)):
            break
        val, x = cache[combo] if combo in cache else lp(dict(zip(keys, combo)))
        if val < best:
            best, best_x = val, x
    if best_x is None:
        return SubproblemResult("infeasible", lp_solves=solves, bound_lps=n_bound)
    out = _fragment(instance, robot, sm, best_x)
    out.objective, out.lp_solves, out.bound_lps = best, solves, n_bound
    return out


# ---------------------------------------------------------------------------
# main loop


@dataclass(frozen=True)
class MatheuristicLimits:
    iterations: int = 200
    stagnation: int = 10
    time_limit: float = 300.0
    master: SolveLimits = SolveLimits()


@dataclass
class MatheuristicResult:
    schedule: Optional[FleetSchedule]
    objective: float
    log: list
    stop_reason: str
    wall_time: float
    source: str  # "dispatch" when the initial plan was never improved

    @property
    def iterations(self):
        return len(self.log)

    def log_jsonl(self) -> str:
        return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in self.log)


class NoIncumbentError(RuntimeError):
    def __init__(self, log):
        super().__init__("matheuristic found no feasible fleet schedule")
        self.log = log


def run(instance: Instance, config: Config = Config(), limits: MatheuristicLimits = MatheuristicLimits(),
        strategy: str = "enumerate", engine: str = "auto", policy: DispatchPolicy = DispatchPolicy(),
        initial: Optional[FleetSchedule] = None, charger_capacity: bool = True,
        audit_config: Optional[Config] = None) -> MatheuristicResult:
    """Iterate master solve, subproblems and cuts from a dispatch-rule start.

    With ``charger_capacity=False`` the master ignores charger contention, no
    precedences reach the subproblems and merged plans are serialized FIFO
    before they are audited.  Incumbents are always compared on the exact
    objective under `audit_config` (default `config`).
    """
    judge = audit_config or config
    t0 = time.perf_counter()
    elapsed = lambda: time.perf_counter() - t0  # noqa: E731
    best, UB, source = None, math.inf, "dispatch"
    if initial is None:
        try:
            initial = rule_based(instance, policy)
        except InfeasibleTaskError:
            initial = None
    if initial is not None:
        rep = audit(instance, initial, judge.feas_tol, judge)
        if rep.ok:
            best, UB = initial, rep.objective
    master = build_master(instance, config, charger_capacity=charger_capacity)
    R = len(instance.robots)
    evaluated: dict = {}  # (robot, pattern arcs) -> SubproblemResult of the first evaluation
    fragments: dict = {}  # (robot, arcs, precedences) -> SubproblemResult
    log = []
    stop = "iteration_limit"
    since_improvement = 0
    for it in range(1, limits.iterations + 1):
        left = limits.time_limit - elapsed()
        if left <= 0:
            stop = "time_limit"
            break
        res, _ = solve_fleet_model(master.fm, replace(limits.master, time_limit=left), engine)
        entry = {"iteration": it, "master_status": res.status,
                 "master_objective": res.objective if res.has_solution else None}
        if not res.has_solution:
            entry.update(incumbent=UB, wall_time=elapsed())
            log.append(entry)
            stop = "master_infeasible" if res.status == "infeasible" else "time_limit"
            break
        patterns, precs = extract_patterns(master, res.values)
        if not charger_capacity:
            precs = {r: [] for r in precs}
        dm = master.fm.dmap
        entry["theta"] = [float(res.values[dm.theta[r]]) for r in range(R)]
        entry["patterns"] = {str(r): patterns[r].to_dict() for r in range(R)}
        statuses, As, cuts, frag = {}, {}, [], {}
        for r in range(R):
            pat = patterns[r]
            pkey = (r, pat.arcs)
            fkey = (r, pat.arcs, tuple(sorted((p.session, p.kind, round(p.time, 9)) for p in precs[r])))
            if fkey in fragments:
                sub = fragments[fkey]
            else:
                sm = build_subproblem(instance, r, pat, precs[r], config)
                sub = solve_subproblem(instance, r, sm, strategy, engine)
                fragments[fkey] = sub
            statuses[r] = sub.status
            As[r] = sub.A if sub.status == "feasible" else None
            frag[r] = sub
            if pkey not in evaluated:
                evaluated[pkey] = sub
                cut = make_cut(pat, sub, master.M_theta)
                add_cut(master, cut)
                cuts.append({"robot": r, "kind": cut.kind, "N": pat.N, "A": cut.A})
        entry.update(statuses={str(r): s for r, s in statuses.items()},
                     A={str(r): a for r, a in As.items()}, cuts=cuts)
        improved = False
        if all(s == "feasible" for s in statuses.values()):
            timing = {}
            for r in range(R):
                timing.update(frag[r].timing)
            merged = FleetSchedule(tuple(frag[r].legs for r in range(R)), timing)
            if charger_capacity:
                merged = replace(merged, degradation=tuple(robot_degradation(instance, merged, "exact")))
            else:
                merged = fifo_repair(instance, merged)
            rep = audit(instance, merged, judge.feas_tol, judge)
            entry["merged_objective"] = rep.objective
            entry["merged_ok"] = rep.ok
            if rep.ok and rep.objective < UB - 1e-12:
                best, UB, source, improved = merged, rep.objective, "matheuristic", True
        since_improvement = 0 if improved else since_improvement + 1
        entry.update(incumbent=UB, improved=improved, wall_time=elapsed())
        log.append(entry)
        # the master estimate has caught up with the incumbent; a stopping rule, not a gap certificate
        if UB <= res.objective + max(1e-9, 1e-9 * abs(UB)):
            stop = "bound"
            break
        if not cuts:
            stop = "converged"
            break
        if since_improvement >= limits.stagnation:
            stop = "stagnation"
            break
        if elapsed() >= limits.time_limit:
            stop = "time_limit"
            break
    if best is None:
        raise NoIncumbentError(log)
    return MatheuristicResult(best, UB, log, stop, elapsed(), source)
