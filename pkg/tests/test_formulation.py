import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amrfleet.audit import audit
from amrfleet.domain import Charger, Config, Direct, Instance, Robot, Task, WarehouseGeometry
from amrfleet.formulation import (
    BuildOptions, DecodeError, build_monolithic, decode_solution, envelope, mccormick_rows, model_size,
    partition_grid, solve_monolithic,
)
from amrfleet.generator import GenParams, generate
from amrfleet.solver import MilpModel, SolveLimits, solve_lp
from conftest import two_task_instance, two_task_schedule
from helpers import encode_schedule


def test_model_size_counts():
    inst = generate(GenParams(R=2, K=3, M=1, seed=0))
    size = model_size(inst, Config(), BuildOptions(eliminate=False))
    assert size["direct"] == 18 and size["end"] == 6 and size["gamma"] == 36
    assert size["z"] == 324 and size["sessions"] == {0: 36} and size["pairs"] == 630


def test_direct_arcs_grow_quadratically():
    for K in range(1, 7):
        inst = generate(GenParams(R=3, K=K, M=1, seed=1))
        assert model_size(inst, Config(), BuildOptions(eliminate=False))["direct"] == 3 * K * K


def test_partition_grid_tiles_ranges():
    g = partition_grid(0.1, 1.0, 480, 3, 4)
    assert g.S[0][0] == 0.1 and g.S[-1][1] == 1.0 and g.W[-1][1] == 480
    assert all(a[1] == b[0] for a, b in zip(g.S, g.S[1:]))
    assert len(g.cells) == 12


def test_envelope_example():
    lo, hi = envelope((0.5, 1.0, 0.0, 30.0), 0.8, 10.0)
    assert lo == pytest.approx(5.0) and hi == pytest.approx(10.0)


@st.composite
def box_point(draw):
    s0 = draw(st.floats(0, 1))
    s1 = s0 + draw(st.floats(0, 1))
    w0 = draw(st.floats(0, 400))
    w1 = w0 + draw(st.floats(0, 100))
    s = draw(st.floats(s0, s1)) if s1 > s0 else s0
    w = draw(st.floats(w0, w1)) if w1 > w0 else w0
    return (s0, s1, w0, w1), s, w


@given(box_point())
@settings(max_examples=500)
def test_envelope_brackets_the_product(bp):
    box, s, w = bp
    lo, hi = envelope(box, s, w)
    tol = 1e-9 * (1 + abs(s * w))
    assert lo <= s * w + tol and s * w <= hi + tol
    assert hi - lo <= (box[1] - box[0]) * (box[3] - box[2]) / 2 + tol
    for cs in box[:2]:
        for cw in box[2:]:
            clo, chi = envelope(box, cs, cw)
            assert clo == pytest.approx(cs * cw, abs=1e-9) and chi == pytest.approx(cs * cw, abs=1e-9)


def _cell_model(box, zval):
    mdl = MilpModel()
    z = mdl.add_var("z", zval, zval)
    s = mdl.add_var("s", 0, 10, -1)
    w = mdl.add_var("w", 0, 1000, -1)
    ell = mdl.add_var("l", 0, 10000, -1)
    mccormick_rows(mdl, box, z, s, w, ell, "mc")
    return mdl


def test_mccormick_rows_vanish_with_the_selector():
    res = solve_lp(_cell_model((0.5, 1.0, 0.0, 30.0), 0.0))
    assert res.objective == pytest.approx(0.0)
    res = solve_lp(_cell_model((0.5, 1.0, 0.0, 30.0), 1.0))
    assert res.values[1:] == pytest.approx([1.0, 30.0, 30.0])


def test_mccormick_rows_count():
    mdl = _cell_model((0.1, 0.4, 0, 160), 1.0)
    assert mdl.n_rows == 8
    assert sorted(r.name for r in mdl.rows) == sorted(
        f"mc_{s}" for s in ("slo", "shi", "wlo", "whi", "mc1", "mc2", "mc3", "mc4"))


def test_variable_names_follow_the_export_convention():
    fm = build_monolithic(two_task_instance(), Config(), BuildOptions(eliminate=False))
    names = set(fm.model.var_names)
    for n in ("x_r0_k1", "y_r0_src_1", "y_r0_1_snk", "g_r0_src_1_m0_l0", "g_r0_1_2_m0_l1",
              "z_r0_1_2_m0_l0_p2_q2", "T_k1", "tard_k2", "A_r0", "Amax"):
        assert n in names
    assert len(names) == fm.model.n_vars
    assert len(fm.dmap.role_of) == fm.model.n_vars


def test_options_drop_their_families():
    inst = generate(GenParams(R=2, K=3, M=1, seed=2))
    off = build_monolithic(inst, Config(), BuildOptions(degradation_terms=False, pairs="all"))
    assert not off.dmap.l and not off.dmap.z and not off.dmap.A and off.dmap.u
    nocap = build_monolithic(inst, Config(), BuildOptions(charger_capacity=False, pairs="all"))
    assert not nocap.dmap.u and nocap.dmap.z


def test_empty_instance_is_trivially_optimal():
    inst = generate(GenParams(R=2, K=0, M=1, seed=0))
    res = solve_monolithic(inst)
    assert res.status == "optimal" and res.objective == 0
    assert all(r == () for r in res.schedule.routes)


def test_decode_of_hand_vector():
    inst, sched = two_task_instance(), two_task_schedule()
    fm = build_monolithic(inst, Config(), BuildOptions(pairs="all"))
    v = encode_schedule(fm, sched)
    assert fm.model.max_violation(v) <= 1e-9
    back = decode_solution(fm, v)
    assert back.routes[0][0] == Direct(0, 1)
    leg = back.routes[0][1]
    assert (leg.i, leg.j, leg.charger, leg.mode) == (1, 2, 0, 0)
    assert leg.duration == pytest.approx(20) and leg.aux == pytest.approx(0.697 * 10)


def test_decode_rejects_missing_partition_and_broken_chain():
    inst, sched = two_task_instance(), two_task_schedule()
    fm = build_monolithic(inst, Config(), BuildOptions())
    v = encode_schedule(fm, sched)
    bad = v.copy()
    for key, var in fm.dmap.z.items():
        bad[var] = 0
    with pytest.raises(DecodeError):
        decode_solution(fm, bad)
    broken = v.copy()
    broken[fm.dmap.y[(0, 0, 1)]] = 0
    with pytest.raises(DecodeError, match="robot 0"):
        decode_solution(fm, broken)


def test_unreachable_task_warns():
    geo = WarehouseGeometry()
    inst = Instance(geo, [Robot(0)], [Task(1, (90, 40), 0, 50, 1, 0.95)], [Charger(0, (50, 0))], 480)
    fm = build_monolithic(inst)
    assert fm.warnings and "task 1" in fm.warnings[0]


def _contended():
    """Two low robots that both need the only charger before their first task."""
    geo = WarehouseGeometry()
    tasks = [Task(1, (60, 20), 5, 40, 3, 0.3), Task(2, (70, 30), 5, 40, 3, 0.3)]
    return Instance(geo, [Robot(0, S0=0.3), Robot(1, S0=0.3)], tasks, [Charger(0, (50, 0))], 480)


def test_lazy_pairs_match_all_pairs():
    inst = _contended()
    lazy = solve_monolithic(inst, Config(), BuildOptions(pairs="lazy"), SolveLimits(time_limit=120))
    full = solve_monolithic(inst, Config(), BuildOptions(pairs="all"), SolveLimits(time_limit=120))
    assert lazy.status == full.status == "optimal"
    assert lazy.objective == pytest.approx(full.objective, rel=1e-6, abs=1e-9)
    assert lazy.fleet_model.pairs_added  # the first relaxation overlapped
    rep = audit(inst, lazy.schedule)
    assert rep.ok, rep.summary()


@pytest.mark.parametrize("seed", range(3))
def test_solutions_audit_clean_and_respect_the_box_gap(seed):
    inst = generate(GenParams(R=1, K=3, M=1, seed=seed, energy=(0.25, 0.4)))
    cfg = Config()
    res = solve_monolithic(inst, cfg)
    rep = audit(inst, res.schedule)
    assert res.status == "optimal" and rep.ok
    dS, dW = 0.9 / cfg.P_S, inst.horizon / cfg.P_W
    for _, leg in res.schedule.charges():
        assert abs(leg.aux - leg.idle_product) <= dS * dW / 4 + 1e-9
    table = res.fleet_model.table
    for legs in res.schedule.routes:
        for leg in legs:
            assert (leg.i, leg.j) not in table.eliminated_direct
    assert np.isfinite(rep.objective)
