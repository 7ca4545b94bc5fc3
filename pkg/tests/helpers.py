"""Test helpers for patterns, cut logs and schedule encoding."""

import numpy as np

from amrfleet.domain import Charge
from amrfleet.formulation import EncodeError as NotRepresentable, encode_schedule

__all__ = ["NotRepresentable", "encode_schedule", "random_pattern", "pattern_of", "check_cut_log"]


def random_pattern(inst, rng, c, robot=0):
    """A random route for `robot` over a random task subset with `c` charging transitions."""
    from amrfleet.matheuristic import Pattern

    size = int(rng.integers(max(1, c), inst.n + 1))
    order = [int(k) for k in rng.permutation(np.arange(1, inst.n + 1))[:size]]
    charged = set(int(t) for t in rng.choice(size, size=c, replace=False))
    nodes = [0] + order
    arcs = []
    for t in range(size):
        i, j = nodes[t], nodes[t + 1]
        if t in charged:
            m = int(rng.integers(len(inst.chargers)))
            l = int(rng.integers(len(inst.robots[robot].modes)))
            arcs.append(("g", (i, j, m, l)))
        else:
            arcs.append(("y", (i, j)))
    arcs.append(("y", (nodes[-1], inst.sink)))
    return Pattern(robot, tuple(arcs))


def pattern_of(r, legs):
    """The pattern a schedule route realizes."""
    from amrfleet.matheuristic import Pattern

    arcs = [("g", (leg.i, leg.j, leg.charger, leg.mode)) if isinstance(leg, Charge) else ("y", (leg.i, leg.j))
            for leg in legs]
    return Pattern(r, tuple(arcs))


def check_cut_log(log):
    """Mechanical cut checks over an iteration log; returns a list of failures.

    A pattern proposed again after a feasible evaluation must come with
    theta_r >= its recorded degradation; a pattern that drew a no-good cut
    must never be proposed again.
    """
    import json

    seen = {}
    failures = []
    for entry in log:
        if "patterns" not in entry:
            continue
        current = {}
        for r, pat in entry["patterns"].items():
            key = (r, json.dumps(pat, sort_keys=True))
            if key in seen:
                status, A = seen[key]
                if status != "feasible":
                    failures.append(f"iteration {entry['iteration']}: excluded pattern of robot {r} reappeared")
                elif entry["theta"][int(r)] < A - 1e-9:
                    failures.append(f"iteration {entry['iteration']}: theta_{r} = {entry['theta'][int(r)]:.6g} "
                                    f"below recorded {A:.6g}")
            else:
                current[key] = (entry["statuses"][r], entry["A"][r])
        seen.update(current)
    return failures
