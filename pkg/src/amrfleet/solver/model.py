"""Solver-neutral MILP container."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class Row:
    idx: tuple[int, ...]
    coef: tuple[float, ...]
    sense: str
    rhs: float
    name: str


@dataclass
class Compiled:
    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binaries: np.ndarray
    obj_const: float


class MilpModel:
    """Variables, linear rows and a linear objective, always minimized.

    Rows are appended in order and keep their position as their id; the
    matheuristic relies on this when it adds cuts to a live model.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.is_binary: list[bool] = []
        self.rows: list[Row] = []
        self.obj_const = 0.0
        self._compiled: Optional[tuple[int, int, Compiled]] = None

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_binaries(self) -> int:
        return sum(self.is_binary)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, obj: float = 0.0,
                binary: bool = False) -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.is_binary.append(bool(binary))
        return len(self.var_names) - 1

    def set_obj(self, var: int, coef: float):
        self.obj[var] = float(coef)

    def add_row(self, terms: Iterable[tuple[int, float]], sense: str, rhs: float, name: str = "") -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        acc: dict[int, float] = {}
        for v, a in terms:
            if not 0 <= v < len(self.var_names):
                raise ValueError(f"row {name}: unknown variable {v}")
            acc[v] = acc.get(v, 0.0) + float(a)
        items = sorted((v, a) for v, a in acc.items() if a != 0.0)
        self.rows.append(Row(tuple(v for v, _ in items), tuple(a for _, a in items), sense, float(rhs),
                             name or f"c{len(self.rows)}"))
        return len(self.rows) - 1

    def validate(self):
        for j, (lo, hi) in enumerate(zip(self.lb, self.ub)):
            if lo > hi:
                raise ValueError(f"variable {self.var_names[j]}: inconsistent bounds")
            if self.is_binary[j] and (lo < 0 or hi > 1):
                raise ValueError(f"binary {self.var_names[j]}: bounds outside [0, 1]")
        for row in self.rows:
            if any(not 0 <= v < self.n_vars for v in row.idx):
                raise ValueError(f"row {row.name} references an unknown variable")

    def compile(self) -> Compiled:
        key = (self.n_vars, self.n_rows)
        if self._compiled is not None and self._compiled[:2] == key:
            cm = self._compiled[2]
            # bounds and objective may have been edited in place
            cm.lb = np.asarray(self.lb)
            cm.ub = np.asarray(self.ub)
            cm.c = np.asarray(self.obj)
            cm.obj_const = self.obj_const
            return cm
        n = self.n_vars
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for row in self.rows:
            if row.sense == "==":
                i = len(b_eq)
                eq_r.extend([i] * len(row.idx))
                eq_c.extend(row.idx)
                eq_v.extend(row.coef)
                b_eq.append(row.rhs)
            else:
                sign = 1.0 if row.sense == "<=" else -1.0
                i = len(b_ub)
                ub_r.extend([i] * len(row.idx))
                ub_c.extend(row.idx)
                ub_v.extend(sign * a for a in row.coef)
                b_ub.append(sign * row.rhs)
        A_ub = sp.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n))
        A_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n))
        cm = Compiled(
            c=np.asarray(self.obj, dtype=float), A_ub=A_ub, b_ub=np.asarray(b_ub, dtype=float),
            A_eq=A_eq, b_eq=np.asarray(b_eq, dtype=float), lb=np.asarray(self.lb, dtype=float),
            ub=np.asarray(self.ub, dtype=float), binaries=np.flatnonzero(self.is_binary),
            obj_const=self.obj_const,
        )
        self._compiled = (key[0], key[1], cm)
        return cm

    def evaluate(self, values) -> float:
        x = np.asarray(values, dtype=float)
        return float(np.dot(self.obj, x) + self.obj_const)

    def max_violation(self, values) -> float:
        """Largest bound or row violation of a value vector (absolute)."""
        x = np.asarray(values, dtype=float)
        worst = float(np.max(np.maximum(np.asarray(self.lb) - x, x - np.asarray(self.ub)), initial=0.0))
        for row in self.rows:
            act = sum(a * x[v] for v, a in zip(row.idx, row.coef))
            if row.sense == "<=":
                viol = act - row.rhs
            elif row.sense == ">=":
                viol = row.rhs - act
            else:
                viol = abs(act - row.rhs)
            worst = max(worst, viol)
        return worst
