import itertools

import pytest
from hypothesis import given, settings, strategies as st

from amrfleet.baselines import DispatchPolicy, InfeasibleTaskError, rule_based
from amrfleet.bigm import build_bigm, latest_start, published_direct_bigm, published_soc_bigm, tight_bigm
from amrfleet.domain import Config, Instance, Robot, Task, WarehouseGeometry
from amrfleet.formulation import BuildOptions, build_monolithic
from amrfleet.generator import GenParams, generate
from helpers import NotRepresentable, encode_schedule


def test_published_direct_constant_example():
    assert published_direct_bigm(a_i=0, p_i=5, tau=10, a_j=20, b_j=30) == 35


def test_published_soc_constant_example():
    # warehouse diagonal 150 m at 60 m/min is 2.5 min, 0.005 SOC
    assert published_soc_bigm(1.0, 0.1, 0.08, 0.005) == pytest.approx(0.985)


def test_published_direct_constant_cuts_a_feasible_schedule():
    # i: a=0, b=60; j: a=0, b=15; p_i=5, tau=2.  Robot A serves j at 0, robot B
    # serves i on time at 60; y_ij = 0, so the row must hold with slack M.
    M = published_direct_bigm(a_i=0, p_i=5, tau=2, a_j=0, b_j=15)
    assert M == 38
    T_i, T_j = 60.0, 0.0
    assert T_j - (T_i + 5 + 2 - M) == pytest.approx(-29)  # violated by 29


def test_published_soc_constant_cuts_a_feasible_schedule():
    # an unselected alternative charging arc into j has s_bar = 0, so its
    # arrival row reads s_in_j <= -e_from + M.  Arriving from a full charge
    # with e_from = 0.005 gives s_in_j = 0.995 > 0.985 - 0.005.
    M = published_soc_bigm(1.0, 0.1, 0.08, 0.005)
    assert 0.995 > M - 0.005


def _elimination_instance():
    geo = WarehouseGeometry(speed=10.0)  # 100 m takes 10 min
    tasks = [Task(1, (0.0, 10.0), 50.0, 60.0, 40.0, 0.1), Task(2, (100.0, 10.0), 20.0, 30.0, 1.0, 0.1)]
    return Instance(geo, [Robot(0)], tasks, [], 480.0)


def test_arc_elimination_example():
    inst = _elimination_instance()
    t = tight_bigm(inst)
    # 50 + 40 + 10 = 100 > b_2 + window = 40
    assert latest_start(inst, 2) == 40
    assert (1, 2) in t.eliminated_direct
    assert (2, 1) not in t.eliminated_direct
    assert not build_bigm(inst, Config(), "naive").eliminated_direct


def _box_worst(lo_i, hi_i, lo_j, hi_j, lead):
    return max(Ti + lead - Tj for Ti, Tj in itertools.product((lo_i, hi_i), (lo_j, hi_j)))


@pytest.mark.parametrize("seed", range(5))
def test_tight_time_constants_cover_the_variable_box(seed):
    inst = generate(GenParams(R=2, K=6, M=2, seed=seed))
    t = tight_bigm(inst)
    n = inst.n
    for i in range(n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            lead = inst.service(i) + inst.tau(i, j)
            worst = _box_worst(inst.release(i), t.Tmax[i], inst.release(j), t.Tmax[j], lead)
            assert t.direct_time(i, j) >= worst - 1e-9
            for m in range(len(inst.chargers)):
                # charging start row B >= T_i + p_i + tau_to with B = 0 when unused
                assert t.charge_start(i, m) >= t.Tmax[i] + inst.service(i) + inst.tau_charger(i, m) - 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_tight_constants_never_exceed_naive(seed):
    inst = generate(GenParams(R=2, K=6, M=1, seed=seed))
    t, nv = build_bigm(inst, Config(), "tight"), build_bigm(inst, Config(), "naive")
    for i in range(inst.n + 1):
        for j in range(1, inst.n + 1):
            if i != j:
                assert t.direct_time(i, j) <= nv.direct_time(i, j)
                assert t.direct_soc_lb(0, i, j) <= nv.direct_soc_lb(0, i, j)
                assert t.direct_soc_ub(0, i, j) <= nv.direct_soc_ub(0, i, j)
        for m in range(len(inst.chargers)):
            assert t.charge_start(i, m) <= nv.charge_start(i, m)
            assert t.reach_charger(0, i, m) <= nv.reach_charger(0, i, m)
            assert t.postcharge_lb(0, i, m) <= nv.postcharge_lb(0, i, m)
            assert t.postcharge_ub(0, i, m) <= nv.postcharge_ub(0, i, m)


@given(st.integers(0, 10**6), st.floats(0.15, 0.5), st.floats(0.05, 0.4), st.sampled_from([0, 1]),
       st.sampled_from(["tight", "naive"]))
@settings(max_examples=25)
def test_every_feasible_dispatch_schedule_satisfies_the_model(seed, thr, extra, mode, bigm):
    """Big-M validity: audited-feasible schedules are points of the model."""
    inst = generate(GenParams(R=2, K=6, M=1, seed=seed, energy=(0.1, 0.2)))
    try:
        sched = rule_based(inst, DispatchPolicy(thr, min(1.0, thr + extra), mode))
    except InfeasibleTaskError:
        return
    if any(t.tardiness > inst.task(k).window for k, t in sched.timing.items()):
        return  # outside the capped tardiness domain by design
    fm = build_monolithic(inst, Config(), BuildOptions(bigm=bigm, pairs="all"))
    try:
        v = encode_schedule(fm, sched)
    except NotRepresentable:
        return
    assert fm.model.max_violation(v) <= 1e-9
