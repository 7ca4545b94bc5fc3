"""JSON files for instances and schedules (schema_version 1).

Both formats round-trip losslessly: floats are written with ``repr``
precision and every known field is required; unknown fields are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path

from .domain import (
    Charge, Charger, ChargingMode, Direct, FleetSchedule, Instance, Robot, Task, TaskTiming,
    WarehouseGeometry,
)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def _check_keys(obj, required, where, optional=()):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = set(obj) - set(required) - set(optional)
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = set(required) - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing field(s) {sorted(missing)}")


def _pt(v):
    return [float(v[0]), float(v[1])]


def instance_to_dict(inst: Instance) -> dict:
    g = inst.geometry
    return {
        "schema_version": SCHEMA_VERSION,
        "geometry": {
            "width_m": g.width_m, "height_m": g.height_m, "depot": _pt(g.depot),
            "speed_m_per_min": g.speed, "energy_rate": g.energy_rate,
        },
        "robots": [
            {
                "id": r.id, "S0": r.S0, "Smin": r.Smin, "Smax": r.Smax, "idle_aging": r.idle_aging,
                "modes": [{"name": m.name, "rate": m.rate, "aging": m.aging} for m in r.modes],
            }
            for r in inst.robots
        ],
        "tasks": [
            {
                "id": t.id, "location": _pt(t.location), "release": t.release, "due": t.due,
                "service": t.service, "energy": t.energy,
            }
            for t in inst.tasks
        ],
        "chargers": [{"id": c.id, "position": _pt(c.position)} for c in inst.chargers],
        "horizon": inst.horizon,
    }


def _version(d, where):
    if not isinstance(d, dict) or "schema_version" not in d:
        raise SchemaError(f"{where}: missing schema_version")
    if d["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"{where}: unsupported schema_version {d['schema_version']!r} (expected {SCHEMA_VERSION})")


def instance_from_dict(d: dict) -> Instance:
    _version(d, "instance")
    _check_keys(d, ["schema_version", "geometry", "robots", "tasks", "chargers", "horizon"], "instance")
    g = d["geometry"]
    _check_keys(g, ["width_m", "height_m", "depot", "speed_m_per_min", "energy_rate"], "geometry")
    geometry = WarehouseGeometry(g["width_m"], g["height_m"], tuple(g["depot"]), g["speed_m_per_min"],
                                 g["energy_rate"])
    robots = []
    for r in d["robots"]:
        _check_keys(r, ["id", "S0", "Smin", "Smax", "idle_aging", "modes"], "robot")
        modes = []
        for m in r["modes"]:
            _check_keys(m, ["name", "rate", "aging"], "mode")
            modes.append(ChargingMode(m["name"], m["rate"], m["aging"]))
        robots.append(Robot(r["id"], r["S0"], r["Smin"], r["Smax"], r["idle_aging"], tuple(modes)))
    tasks = []
    for t in d["tasks"]:
        _check_keys(t, ["id", "location", "release", "due", "service", "energy"], "task")
        tasks.append(Task(t["id"], tuple(t["location"]), t["release"], t["due"], t["service"], t["energy"]))
    chargers = []
    for c in d["chargers"]:
        _check_keys(c, ["id", "position"], "charger")
        chargers.append(Charger(c["id"], tuple(c["position"])))
    return Instance(geometry, robots, tasks, chargers, d["horizon"])


def dumps(d: dict) -> str:
    return json.dumps(d, indent=2) + "\n"


def loads(text: str, where: str = "<string>") -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: JSON parse error at byte offset {exc.pos}: {exc.msg}") from exc


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path) -> Instance:
    return instance_from_dict(loads(Path(path).read_text(), str(path)))


# ---------------------------------------------------------------------------
# schedules

_CHARGE_FIELDS = ["type", "i", "j", "charger", "mode", "start", "queue", "duration", "wait", "post_soc"]


def schedule_to_dict(s: FleetSchedule) -> dict:
    routes = []
    for legs in s.routes:
        out = []
        for leg in legs:
            if isinstance(leg, Direct):
                out.append({"type": "direct", "i": leg.i, "j": leg.j})
            else:
                row = {
                    "type": "charge", "i": leg.i, "j": leg.j, "charger": leg.charger, "mode": leg.mode,
                    "start": leg.start, "queue": leg.queue, "duration": leg.duration, "wait": leg.wait,
                    "post_soc": leg.post_soc,
                }
                if leg.aux is not None:
                    row["aux"] = leg.aux
                out.append(row)
        routes.append(out)
    return {
        "schema_version": SCHEMA_VERSION,
        "routes": routes,
        "tasks": [
            {"id": k, "T": t.start, "tard": t.tardiness, "s_in": t.soc_in}
            for k, t in sorted(s.timing.items())
        ],
        "degradation": None if s.degradation is None else list(s.degradation),
    }


def schedule_from_dict(d: dict) -> FleetSchedule:
    _version(d, "schedule")
    _check_keys(d, ["schema_version", "routes", "tasks", "degradation"], "schedule")
    routes = []
    for legs in d["routes"]:
        out = []
        for leg in legs:
            if not isinstance(leg, dict) or leg.get("type") not in ("direct", "charge"):
                raise SchemaError("leg: type must be 'direct' or 'charge'")
            if leg["type"] == "direct":
                _check_keys(leg, ["type", "i", "j"], "direct leg")
                out.append(Direct(leg["i"], leg["j"]))
            else:
                _check_keys(leg, _CHARGE_FIELDS, "charge leg", optional=["aux"])
                out.append(Charge(leg["i"], leg["j"], leg["charger"], leg["mode"], leg["start"], leg["queue"],
                                  leg["duration"], leg["wait"], leg["post_soc"], leg.get("aux")))
        routes.append(tuple(out))
    timing = {}
    for t in d["tasks"]:
        _check_keys(t, ["id", "T", "tard", "s_in"], "task timing")
        timing[t["id"]] = TaskTiming(t["T"], t["tard"], t["s_in"])
    deg = d["degradation"]
    return FleetSchedule(tuple(routes), timing, None if deg is None else tuple(deg))


def save_schedule(s: FleetSchedule, path) -> None:
    Path(path).write_text(dumps(schedule_to_dict(s)))


def load_schedule(path) -> FleetSchedule:
    return schedule_from_dict(loads(Path(path).read_text(), str(path)))
