"""CPLEX-style LP text export and a plain-text result import.

The LP file is the escape hatch to external solvers: write the model, solve
it elsewhere, and read back ``name value`` lines with :func:`read_solution`.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .model import MilpModel

_TERMS_PER_LINE = 8


def _num(v: float) -> str:
    return format(v, ".17g")


def _terms(names, idx, coef) -> list[str]:
    out = []
    for v, a in zip(idx, coef):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        body = names[v] if mag == 1 else f"{_num(mag)} {names[v]}"
        if not out:
            out.append(body if sign == "+" else f"- {body}")
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, parts: list[str], tail: str = "") -> list[str]:
    lines = []
    cur = head
    for n, p in enumerate(parts):
        if n and n % _TERMS_PER_LINE == 0:
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {p}" if cur.strip() else f"{cur}{p}"
    if tail:
        cur = f"{cur} {tail}"
    lines.append(cur)
    return lines


def lp_text(model: MilpModel) -> str:
    model.validate()
    names = model.var_names
    lines = ["Minimize"]
    obj_idx = [j for j, c in enumerate(model.obj) if c != 0]
    parts = _terms(names, obj_idx, [model.obj[j] for j in obj_idx])
    if model.obj_const:
        parts.append(("+ " if model.obj_const > 0 else "- ") + _num(abs(model.obj_const)))
    lines.extend(_wrap(" obj:", parts))
    if model.rows:
        lines.append("Subject To")
        for row in model.rows:
            parts = _terms(names, row.idx, row.coef) or [f"0 {names[0]}"]
            sense = "=" if row.sense == "==" else row.sense
            lines.extend(_wrap(f" {row.name}:", parts, f"{sense} {_num(row.rhs)}"))
    bounds = []
    for j, name in enumerate(names):
        lo, hi = model.lb[j], model.ub[j]
        if model.is_binary[j] and lo == 0 and hi == 1:
            continue
        if lo == 0 and hi == math.inf:
            continue
        if lo == -math.inf and hi == math.inf:
            bounds.append(f" {name} free")
        elif lo == hi:
            bounds.append(f" {name} = {_num(lo)}")
        else:
            lo_s = "-inf" if lo == -math.inf else _num(lo)
            hi_s = "+inf" if hi == math.inf else _num(hi)
            bounds.append(f" {lo_s} <= {name} <= {hi_s}")
    if bounds:
        lines.append("Bounds")
        lines.extend(bounds)
    binaries = [names[j] for j in range(model.n_vars) if model.is_binary[j]]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {b}" for b in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp_file(model: MilpModel, path) -> None:
    Path(path).write_text(lp_text(model))


def read_solution(path, model: MilpModel) -> np.ndarray:
    """Parse ``name value`` lines; names not listed are taken as 0."""
    index = {name: j for j, name in enumerate(model.var_names)}
    x = np.zeros(model.n_vars)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'name value'")
        if parts[0] not in index:
            raise ValueError(f"{path}:{lineno}: unknown variable {parts[0]!r}")
        x[index[parts[0]]] = float(parts[1])
    return x


def write_solution(path, model: MilpModel, values) -> None:
    lines = [f"{name} {_num(float(v))}" for name, v in zip(model.var_names, values)]
    Path(path).write_text("\n".join(lines) + "\n")
