"""LP and MILP solves over :class:`MilpModel`.

``solve_lp`` relaxes integrality.  Two LP engines are available: the dense
simplex in :mod:`.simplex`, and HiGHS' dual simplex through
``scipy.optimize.linprog`` for models too large for a dense tableau.
``solve_milp`` is a best-bound branch-and-bound on top of either engine.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .model import Compiled, MilpModel
from .simplex import simplex

# auto engine: dense simplex up to this many rows + columns, finite bounds only
DENSE_LIMIT = 300


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float = 300.0
    node_limit: int = 1_000_000
    rel_gap: float = 1e-6
    int_tol: float = 1e-6
    abs_gap: float = 1e-9

    def __post_init__(self):
        if self.time_limit <= 0 or self.node_limit <= 0 or self.int_tol <= 0:
            raise ValueError("limits must be positive")
        if self.rel_gap < 0 or self.abs_gap < 0:
            raise ValueError("gap targets must be nonnegative")


@dataclass
class SolveResult:
    status: str  # optimal | feasible | infeasible | unbounded | limit
    objective: float = math.inf
    bound: float = -math.inf
    values: Optional[np.ndarray] = None
    gap: float = math.inf
    nodes: int = 0
    wall_time: float = 0.0
    lp_solves: int = 0
    log: list = field(default_factory=list)

    @property
    def has_solution(self) -> bool:
        return self.values is not None


def _lp(cm: Compiled, lb, ub, engine: str):
    """Returns (status, objective, x)."""
    n = cm.c.size
    if engine == "auto":
        size = n + cm.A_ub.shape[0] + cm.A_eq.shape[0]
        dense_ok = size <= DENSE_LIMIT and np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))
        engine = "simplex" if dense_ok else "highs"
    if engine == "simplex":
        res = simplex(cm.c, cm.A_ub.toarray(), cm.b_ub, cm.A_eq.toarray(), cm.b_eq, lb, ub)
        if res.status == "optimal":
            return "optimal", res.objective + cm.obj_const, res.x
        return res.status, math.inf, None
    if engine != "highs":
        raise ValueError(f"unknown LP engine {engine!r}")
    if np.any(lb > ub):
        return "infeasible", math.inf, None
    res = linprog(
        cm.c,
        A_ub=cm.A_ub if cm.A_ub.shape[0] else None, b_ub=cm.b_ub if cm.A_ub.shape[0] else None,
        A_eq=cm.A_eq if cm.A_eq.shape[0] else None, b_eq=cm.b_eq if cm.A_eq.shape[0] else None,
        bounds=np.column_stack([lb, ub]), method="highs-ds",
    )
    if res.status == 0:
        x = np.clip(res.x, lb, ub)
        return "optimal", float(cm.c @ x) + cm.obj_const, x
    if res.status == 2:
        return "infeasible", math.inf, None
    if res.status == 3:
        return "unbounded", -math.inf, None
    return "limit", math.inf, None


def solve_lp(model: MilpModel, lb=None, ub=None, engine: str = "auto") -> SolveResult:
    """Solve the LP relaxation (binaries treated as continuous in their bounds)."""
    t0 = time.perf_counter()
    cm = model.compile()
    lb = cm.lb if lb is None else np.asarray(lb, dtype=float)
    ub = cm.ub if ub is None else np.asarray(ub, dtype=float)
    status, obj, x = _lp(cm, lb, ub, engine)
    res = SolveResult(status, obj, obj if status == "optimal" else -math.inf, x,
                      0.0 if status == "optimal" else math.inf, 0, time.perf_counter() - t0, 1)
    return res


def _gap(ub: float, lb: float) -> float:
    if ub == math.inf:
        return math.inf
    return max(0.0, ub - lb) / max(abs(ub), 1e-6)


def is_feasible_point(cm: Compiled, x, lb=None, ub=None, tol: float = 1e-6) -> bool:
    """True when `x` satisfies every row, bound and integrality requirement."""
    x = np.asarray(x, dtype=float)
    lo = cm.lb if lb is None else lb
    hi = cm.ub if ub is None else ub
    if x.shape != cm.c.shape or np.any(x < lo - tol) or np.any(x > hi + tol):
        return False
    if cm.binaries.size and np.any(np.abs(x[cm.binaries] - np.round(x[cm.binaries])) > tol):
        return False
    if cm.b_ub.size and np.any(cm.A_ub @ x > cm.b_ub + tol * np.maximum(1.0, np.abs(cm.b_ub))):
        return False
    if cm.b_eq.size and np.any(np.abs(cm.A_eq @ x - cm.b_eq) > tol * np.maximum(1.0, np.abs(cm.b_eq))):
        return False
    return True


def solve_milp(model: MilpModel, limits: SolveLimits = SolveLimits(), engine: str = "auto",
               lb=None, ub=None, initial=None) -> SolveResult:
    """Best-bound branch-and-bound.

    Branches on the most fractional binary (ties: lowest variable id).  Open
    nodes are ordered by LP bound, then depth (deeper first), then creation
    order, so equal-bound plateaus are explored depth-first.

    `initial` is an optional warm start; it becomes the first incumbent when
    it is feasible and is ignored otherwise.
    """
    t0 = time.perf_counter()
    cm = model.compile()
    base_lb = cm.lb.copy() if lb is None else np.asarray(lb, dtype=float).copy()
    base_ub = cm.ub.copy() if ub is None else np.asarray(ub, dtype=float).copy()
    bins = cm.binaries
    tol = limits.int_tol

    incumbent, inc_x = math.inf, None
    if initial is not None and is_feasible_point(cm, initial, base_lb, base_ub, limits.int_tol):
        inc_x = np.asarray(initial, dtype=float).copy()
        inc_x[bins] = np.round(inc_x[bins])
        incumbent = float(cm.c @ inc_x) + cm.obj_const
    lp_solves = 0
    nodes = 0
    counter = 0
    heap: list = []

    def fractional(x):
        if bins.size == 0:
            return -1
        v = x[bins]
        frac = np.abs(v - np.round(v))
        mask = frac > tol
        if not mask.any():
            return -1
        score = np.where(mask, np.abs(v - np.floor(v) - 0.5), np.inf)
        return int(bins[int(np.argmin(score))])  # argmin returns the first, i.e. lowest id

    def cutoff():
        if incumbent == math.inf:
            return math.inf
        return incumbent - max(limits.abs_gap, limits.rel_gap * abs(incumbent))

    def bounds_for(fixes):
        lo, hi = base_lb.copy(), base_ub.copy()
        for v, val in fixes:
            lo[v] = hi[v] = val
        return lo, hi

    def evaluate(fixes):
        nonlocal incumbent, inc_x, lp_solves, counter
        lo, hi = bounds_for(fixes)
        status, obj, x = _lp(cm, lo, hi, engine)
        lp_solves += 1
        if status == "unbounded":
            raise RuntimeError("unbounded LP relaxation in a bounded model")
        if status != "optimal" or obj >= cutoff():
            return status
        j = fractional(x)
        if j < 0:
            xr = x.copy()
            xr[bins] = np.round(xr[bins])
            incumbent, inc_x = obj, xr
            return "integral"
        counter += 1
        # only the fixings are kept per node; bounds are rebuilt on demand
        heapq.heappush(heap, (obj, -len(fixes), counter, fixes, j, float(x[j])))
        return "open"

    root = evaluate(())
    root_bound = heap[0][0] if heap else incumbent
    if root == "infeasible" and not heap and inc_x is None:
        return SolveResult("infeasible", nodes=1, wall_time=time.perf_counter() - t0, lp_solves=lp_solves)
    if root == "limit" and not heap and inc_x is None:
        return SolveResult("limit", nodes=1, wall_time=time.perf_counter() - t0, lp_solves=lp_solves)
    nodes = 1
    hit_limit = False
    while heap:
        if time.perf_counter() - t0 > limits.time_limit or nodes >= limits.node_limit:
            hit_limit = True
            break
        bound, _, _, fixes, j, xj = heapq.heappop(heap)
        if bound >= cutoff():
            continue
        nodes += 1
        for val in (0.0, 1.0) if xj < 0.5 else (1.0, 0.0):
            evaluate(fixes + ((j, val),))
    best_bound = min([h[0] for h in heap] + [incumbent]) if hit_limit else incumbent
    if inc_x is None:
        status = "limit" if hit_limit else "infeasible"
        return SolveResult(status, bound=min([h[0] for h in heap], default=-math.inf), nodes=nodes,
                           wall_time=time.perf_counter() - t0, lp_solves=lp_solves)
    gap = _gap(incumbent, best_bound)
    if hit_limit and gap > limits.rel_gap and incumbent - best_bound > limits.abs_gap:
        status = "feasible"
    else:
        status = "optimal"
    return SolveResult(status, incumbent, best_bound, inc_x, gap, nodes, time.perf_counter() - t0, lp_solves,
                       log=[("root_bound", root_bound)])
