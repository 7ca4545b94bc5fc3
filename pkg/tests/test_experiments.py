import json

import pytest

from amrfleet.cli import main
from amrfleet.experiments import (
    ABLATIONS, COLUMNS, ExperimentSpec, SpecError, aggregate, pareto_sweep, run_suite, solve_method,
)
from amrfleet.generator import GenParams, generate
from amrfleet.io import dumps, instance_to_dict, schedule_to_dict
from amrfleet.report import pareto_svg, rows_from_csv, rows_to_csv, rows_to_json, soc_svg

SMALL = dict(R=[2], K=[3], M=[1], seeds=[1, 2], methods=["rule", "monolithic", "matheuristic"],
             ablations=["none", "no_charger_capacity", "single_partition"], time_limit=60,
             energy=[0.3, 0.45])


@pytest.fixture(scope="module")
def rows():
    return run_suite(ExperimentSpec.from_dict(SMALL))


def test_suite_covers_every_cell(rows):
    assert len(rows) == 2 * 3 * 3
    assert all(r.valid for r in rows), [(r.method, r.ablation, r.note) for r in rows if not r.valid]
    mono = [r for r in rows if r.method == "monolithic" and r.ablation == "none"]
    assert all(r.gap_vs_monolithic == 0 for r in mono)
    # the matheuristic is audited under the base physics like everything else
    for r in rows:
        assert r.max_violation <= 1e-6


def test_csv_is_deterministic_apart_from_wall_time(rows):
    again = run_suite(ExperimentSpec.from_dict(SMALL))
    assert rows_to_csv(rows, include_wall_time=False) == rows_to_csv(again, include_wall_time=False)
    header = rows_to_csv(rows).splitlines()[0].split(",")
    assert tuple(header) == COLUMNS
    assert "solve_seconds" not in rows_to_csv(rows, include_wall_time=False).splitlines()[0]


def test_csv_and_json_round_trip(rows):
    back = rows_from_csv(rows_to_csv(rows))
    assert rows_to_csv(back) == rows_to_csv(rows)
    data = json.loads(rows_to_json(rows))
    assert len(data) == len(rows) and set(data[0]) == set(COLUMNS)


def test_aggregate_skips_invalid_rows(rows):
    bad = rows[:1]
    bad[0] = type(bad[0])(**{**bad[0].__dict__, "status": "invalid", "objective": 1e9})
    agg = aggregate(bad + rows[1:])
    assert all(v["objective"] < 1e9 for v in agg.values())


def test_spec_validation():
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"methods": ["oracle"]})
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"ablations": ["everything"]})
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"seeds": [1, 1]})
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"colour": "blue"})
    assert set(ABLATIONS) >= {"none", "no_idle_aging", "no_charge_aging", "no_charger_capacity"}
    spec = ExperimentSpec.from_dict(SMALL)
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_oversized_monolithic_is_skipped():
    spec = ExperimentSpec.from_dict({**SMALL, "K": [4], "seeds": [1], "methods": ["monolithic"],
                                     "ablations": ["none"], "monolithic_max_tasks": 3})
    (row,) = run_suite(spec)
    assert row.status == "skipped" and "K > 3" in row.note


def test_pareto_sweep_orders_and_trades_off():
    inst = generate(GenParams(R=1, K=3, M=1, seed=3, energy=(0.25, 0.4)))
    pts = pareto_sweep(inst, [10.0, 0.0], time_limit=60, method="monolithic")
    assert [p.mu for p in pts] == [0.0, 10.0]
    # more weight on lateness never buys more lateness
    assert pts[1].total_tardiness <= pts[0].total_tardiness + 1e-6
    assert pts[1].total_degradation >= pts[0].total_degradation - 1e-6
    assert pareto_svg(pts).startswith("<svg")
    with pytest.raises(SpecError):
        pareto_sweep(inst, [1.0])


def test_soc_plot(hand):
    inst, sched = hand
    svg = soc_svg(inst, sched)
    assert svg.count("<polyline") == 1 and "stroke-dasharray" in svg


def test_unknown_method():
    inst = generate(GenParams(R=1, K=1, M=1, seed=0))
    with pytest.raises(SpecError):
        solve_method(inst, "oracle")


# ---------------------------------------------------------------------------
# command line


@pytest.fixture
def files(tmp_path):
    inst = generate(GenParams(R=2, K=3, M=1, seed=5))
    ipath = tmp_path / "inst.json"
    ipath.write_text(dumps(instance_to_dict(inst)))
    return tmp_path, ipath, inst


def test_cli_generate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "-R", "2", "-K", "4", "--seed", "9", "--out", str(a)]) == 0
    assert main(["generate", "-R", "2", "-K", "4", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_solve_validate_report(files):
    tmp, ipath, inst = files
    spath, log = tmp / "s.json", tmp / "log.jsonl"
    assert main(["solve", str(ipath), "--method", "matheuristic", "--log", str(log), "--out", str(spath)]) == 0
    assert log.read_text().strip()
    assert main(["validate", str(spath), "--instance", str(ipath), "--json", "--out", str(tmp / "v.json")]) == 0
    assert json.loads((tmp / "v.json").read_text())["ok"] is True
    assert main(["report", str(spath), "--instance", str(ipath), "--format", "svg",
                 "--out", str(tmp / "soc.svg")]) == 0
    assert (tmp / "soc.svg").read_text().startswith("<svg")


def test_cli_validate_flags_violations(files, hand):
    tmp, _, _ = files
    inst, sched = hand
    t2 = sched.timing[2]
    sched.timing[2] = type(t2)(t2.start - 10, t2.tardiness, t2.soc_in)
    ipath, spath = tmp / "h.json", tmp / "hs.json"
    ipath.write_text(dumps(instance_to_dict(inst)))
    spath.write_text(dumps(schedule_to_dict(sched)))
    assert main(["validate", str(spath), "--instance", str(ipath)]) == 1


def test_cli_suite_and_report(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({**SMALL, "seeds": [1], "methods": ["rule"], "ablations": ["none"]}))
    out = tmp_path / "rows.csv"
    assert main(["suite", str(spec), "--quiet", "--out", str(out)]) == 0
    assert main(["report", str(out), "--no-wall-time", "--out", str(tmp_path / "r.csv")]) == 0
    assert "solve_seconds" not in (tmp_path / "r.csv").read_text()
    assert main(["report", str(out), "--format", "json", "--out", str(tmp_path / "r.json")]) == 0


def test_cli_sweep(files):
    tmp, ipath, _ = files
    out = tmp / "p.csv"
    assert main(["sweep", str(ipath), "--mu-values", "0", "5", "--method", "rule", "--out", str(out),
                 "--svg", str(tmp / "p.svg")]) == 0
    assert out.read_text().splitlines()[0] == "mu,total_degradation,total_tardiness,objective"
    assert main(["report", str(out), "--format", "svg", "--out", str(tmp / "p2.svg")]) == 0


def test_cli_exit_codes(files, capsys):
    tmp, ipath, _ = files
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(ipath), "--method", "oracle"])
    assert exc.value.code == 3
    assert main(["solve", str(tmp / "missing.json")]) == 3
    (tmp / "junk.json").write_text("{}")
    assert main(["solve", str(tmp / "junk.json")]) == 3
    (tmp / "spec.json").write_text(json.dumps({"methods": ["oracle"]}))
    assert main(["suite", str(tmp / "spec.json")]) == 3
    heavy = generate(GenParams(R=1, K=1, M=1, seed=0))
    # an unservable task makes the dispatch rule give up
    d = instance_to_dict(heavy)
    d["tasks"][0]["energy"] = 0.95
    (tmp / "heavy.json").write_text(json.dumps(d))
    assert main(["solve", str(tmp / "heavy.json"), "--method", "rule"]) == 1
