"""Result emission: CSV with a fixed header, JSON, and small SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .audit import soc_trace
from .domain import FleetSchedule, Instance
from .experiments import COLUMNS, WALL_TIME_COLUMNS, ParetoPoint, ResultRow

PARETO_COLUMNS = ("mu", "total_degradation", "total_tardiness", "objective")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def rows_to_csv(rows: Iterable[ResultRow], include_wall_time: bool = True) -> str:
    cols = [c for c in COLUMNS if include_wall_time or c not in WALL_TIME_COLUMNS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in cols])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    out = []
    types = {f: type(getattr(ResultRow("", 0, 0, 0, 0, "", "", 0.0, 0.0, ""), f)) for f in COLUMNS}
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {}
        for c in COLUMNS:
            raw = rec.get(c, "")
            t = types[c]
            if t is float:
                kw[c] = float(raw) if raw != "" else math.nan
            elif t is int:
                kw[c] = int(raw) if raw != "" else -1
            else:
                kw[c] = raw
        out.append(ResultRow(**kw))
    return out


def rows_to_json(rows: Iterable[ResultRow]) -> str:
    def clean(d):
        out = {}
        for k, v in d.items():
            if isinstance(v, np.generic):
                v = v.item()
            out[k] = None if isinstance(v, float) and math.isnan(v) else v
        return out
    return json.dumps([clean(asdict(r)) for r in rows], indent=1, sort_keys=False) + "\n"


def pareto_to_csv(points: Sequence[ParetoPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PARETO_COLUMNS)
    for p in sorted(points, key=lambda p: p.mu):
        w.writerow([_fmt(getattr(p, c)) for c in PARETO_COLUMNS])
    return buf.getvalue()


def write_text(path: str, text: str):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# SVG


def _frame(xs, ys, width, height, pad):
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)  # noqa: E731
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)  # noqa: E731
    return sx, sy, (x0, x1, y0, y1)


def _svg(width, height, body, title, xlabel, ylabel, box, pad):
    x0, x1, y0, y1 = box
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="#888"/>',
        *body,
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="12" y="{height / 2:.1f}" transform="rotate(-90 12 {height / 2:.1f})" '
        f'text-anchor="middle" font-size="12">{escape(ylabel)}</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="10">{x0:.4g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad - 4}" y="{pad + 8}" font-size="10" text-anchor="end">{y1:.4g}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def pareto_svg(points: Sequence[ParetoPoint], width: int = 480, height: int = 320) -> str:
    """Scatter of total tardiness against total degradation, labeled by mu."""
    pad = 48
    if not points:
        raise ValueError("no points to plot")
    xs = [p.total_tardiness for p in points]
    ys = [p.total_degradation for p in points]
    sx, sy, box = _frame(xs, ys, width, height, pad)
    body = []
    for p in points:
        cx, cy = sx(p.total_tardiness), sy(p.total_degradation)
        body.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="#1f77b4"/>')
        body.append(f'<text x="{cx + 6:.2f}" y="{cy - 6:.2f}" font-size="10">mu={p.mu:g}</text>')
    return _svg(width, height, body, "degradation vs tardiness", "total tardiness (min)",
                "total degradation", box, pad)


def soc_series(instance: Instance, schedule: FleetSchedule) -> dict:
    """Per-robot (times, socs) from the audit trace."""
    return {r: soc_trace(instance, r, legs, schedule.timing) for r, legs in enumerate(schedule.routes)}


def soc_svg(instance: Instance, schedule: FleetSchedule, width: int = 640, height: int = 320) -> str:
    """SOC over time for every robot; charging shows as rising segments."""
    pad = 48
    series = soc_series(instance, schedule)
    xs = [0.0, instance.horizon]
    ys = [0.0, max(rb.Smax for rb in instance.robots)]
    sx, sy, box = _frame(xs, ys, width, height, pad)
    colors = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
    body = []
    for r, (t, s) in series.items():
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, s))
        body.append(f'<polyline fill="none" stroke="{colors[r % len(colors)]}" stroke-width="1.5" '
                    f'points="{pts}"><title>robot {r}</title></polyline>')
    for rb in {rb.Smin for rb in instance.robots}:
        body.append(f'<line x1="{pad}" x2="{width - pad}" y1="{sy(rb):.2f}" y2="{sy(rb):.2f}" '
                    'stroke="#c00" stroke-dasharray="4 3"/>')
    return _svg(width, height, body, "state of charge", "time (min)", "SOC", box, pad)
