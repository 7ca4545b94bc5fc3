"""Dense bounded-variable primal simplex.

Two-phase revised simplex on ``A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub``
with every bound finite.  Pricing is Dantzig (largest reduced cost); after a
run of degenerate pivots it falls back to Bland's rule until progress resumes.
The basis is refactored with a dense LU at every iteration, which keeps the
code short and is fine for the few-hundred-row models it is meant for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


class NumericalError(RuntimeError):
    pass


@dataclass
class SimplexResult:
    status: str  # optimal | infeasible | limit
    x: np.ndarray | None
    objective: float
    iterations: int


_DEGENERATE_RUN = 50


def _iterate(A, b, cost, lo, hi, x, basis, tol, max_iter, it0):
    m, N = A.shape
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True
    it = it0
    degenerate_run = 0
    while True:
        if it >= max_iter:
            return "limit", it
        B = A[:, basis]
        try:
            lu = la.lu_factor(B, check_finite=False)
        except (ValueError, la.LinAlgError) as exc:  # pragma: no cover - defensive
            raise NumericalError(f"basis factorization failed: {exc}") from exc
        diag = np.abs(np.diag(lu[0]))
        if m and diag.min() <= 1e-11 * max(1.0, diag.max()):
            cond = np.linalg.cond(B)
            raise NumericalError(f"singular basis (condition estimate {cond:.3e})")
        xn = x.copy()
        xn[basis] = 0.0
        x[basis] = la.lu_solve(lu, b - A @ xn, check_finite=False) if m else x[basis]
        y = la.lu_solve(lu, cost[basis], trans=1, check_finite=False) if m else np.zeros(0)
        d = cost - A.T @ y
        free = (~in_basis) & (hi - lo > tol)
        at_lo = x <= lo + tol
        up = free & at_lo & (d < -tol)
        down = free & ~at_lo & (d > tol)
        cand = np.flatnonzero(up | down)
        if cand.size == 0:
            return "optimal", it
        if degenerate_run >= _DEGENERATE_RUN:
            q = int(cand[0])  # Bland
        else:
            q = int(cand[np.argmax(np.abs(d[cand]))])
        dirn = 1.0 if up[q] else -1.0
        alpha = la.lu_solve(lu, A[:, q], check_finite=False) if m else np.zeros(0)
        delta = -dirn * alpha
        xb = x[basis]
        t_best = hi[q] - lo[q]
        leave = -1
        for i in np.flatnonzero(np.abs(delta) > 1e-12):
            if delta[i] < 0:
                t = (xb[i] - lo[basis[i]]) / -delta[i]
            else:
                t = (hi[basis[i]] - xb[i]) / delta[i]
            t = max(t, 0.0)
            if t < t_best - 1e-12 or (t <= t_best + 1e-12 and leave >= 0 and (
                    basis[i] < basis[leave] if degenerate_run >= _DEGENERATE_RUN
                    else abs(delta[i]) > abs(delta[leave]))):
                t_best, leave = t, i
        if not np.isfinite(t_best):
            raise NumericalError("unbounded ray in a bounded model")
        degenerate_run = degenerate_run + 1 if t_best <= tol else 0
        x[basis] = xb + t_best * delta
        x[q] += dirn * t_best
        if leave >= 0:
            out = basis[leave]
            x[out] = lo[out] if delta[leave] < 0 else hi[out]
            in_basis[out] = False
            in_basis[q] = True
            basis[leave] = q
        it += 1


def simplex(c, A_ub, b_ub, A_eq, b_eq, lb, ub, tol=1e-9, max_iter=20000) -> SimplexResult:
    """Minimize ``c @ x``; returns status optimal/infeasible/limit."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
    b_ub = np.asarray(b_ub, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("simplex requires finite bounds on every variable")
    if np.any(lb > ub + tol):
        return SimplexResult("infeasible", None, np.inf, 0)
    m1, m2 = A_ub.shape[0], A_eq.shape[0]
    m = m1 + m2
    minact = np.minimum(A_ub * lb, A_ub * ub).sum(axis=1) if m1 else np.zeros(0)
    smax = b_ub - minact
    if np.any(smax < -1e-9):
        return SimplexResult("infeasible", None, np.inf, 0)
    smax = np.maximum(smax, 0.0)

    A = np.zeros((m, n + m1))
    A[:m1, :n] = A_ub
    A[m1:, :n] = A_eq
    A[:m1, n:] = np.eye(m1)
    b = np.concatenate([b_ub, b_eq])
    lo = np.concatenate([lb, np.zeros(m1)])
    hi = np.concatenate([ub, smax])
    x = lo.copy()
    resid = b - A[:, :n] @ x[:n]

    basis, art_cols, art_rows = [], [], []
    for i in range(m):
        if i < m1 and 0.0 <= resid[i] <= smax[i]:
            x[n + i] = resid[i]
            basis.append(n + i)
            continue
        if i < m1:
            x[n + i] = min(max(resid[i], 0.0), smax[i])
            r = resid[i] - x[n + i]
        else:
            r = resid[i]
        art_rows.append(i)
        art_cols.append(1.0 if r >= 0 else -1.0)
        basis.append(None)
    n_art = len(art_rows)
    if n_art:
        Art = np.zeros((m, n_art))
        for a, (i, s) in enumerate(zip(art_rows, art_cols)):
            Art[i, a] = s
        A = np.hstack([A, Art])
        N0 = n + m1
        x = np.concatenate([x, np.zeros(n_art)])
        lo = np.concatenate([lo, np.zeros(n_art)])
        hi = np.concatenate([hi, np.full(n_art, np.inf)])
        for a, i in enumerate(art_rows):
            basis[i] = N0 + a
            x[N0 + a] = abs(b[i] - A[i, :N0] @ x[:N0])
        cost1 = np.zeros(A.shape[1])
        cost1[N0:] = 1.0
        status, it = _iterate(A, b, cost1, lo, hi, x, basis, tol, max_iter, 0)
        if status == "limit":
            return SimplexResult("limit", None, np.inf, it)
        infeas = x[N0:].sum()
        if infeas > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
            return SimplexResult("infeasible", None, np.inf, it)
        hi[N0:] = 0.0
        x[N0:] = 0.0
    else:
        it = 0
    cost = np.zeros(A.shape[1])
    cost[:n] = c
    status, it = _iterate(A, b, cost, lo, hi, x, basis, tol, max_iter, it)
    if status == "limit":
        return SimplexResult("limit", None, np.inf, it)
    xs = np.clip(x[:n], lb, ub)
    return SimplexResult("optimal", xs, float(c @ xs), it)
