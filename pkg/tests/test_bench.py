import csv
import io
import json
import os

import pytest

from rcsmr.bench.cli import main
from rcsmr.bench.config import RESULT_FIELDS, RunResult, UsageError, WorkloadConfig
from rcsmr.bench.emit import CSV_FIELDS, emit, records
from rcsmr.bench.runner import node_bytes, run, run_repeated


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(structure="tree"), "structure"),
        (dict(scheme="rcu"), "scheme"),
        (dict(threads=0), "threads"),
        (dict(update_pct=60, rq_pct=50), "exceeds"),
        (dict(structure="hash", rq_pct=5), "ordered"),
        (dict(init_size=10, key_range=5), "init-size"),
        (dict(duration_s=0), "duration"),
        (dict(threads=10, max_threads=10), "exceed"),
        (dict(min_total_ops=-1), "min"),
    ],
)
def test_config_rejects(kw, msg):
    with pytest.raises(UsageError, match=msg):
        WorkloadConfig(**kw)


def test_key_range_default():
    assert WorkloadConfig(init_size=50).key_range == 100


def test_node_bytes():
    assert node_bytes("bst", "ebr") == 40
    assert node_bytes("bst", "rc-ebr") == 56
    assert node_bytes("list", "rc-ibr") == 56
    assert node_bytes("dlqueue", "hp") == 32


def _fake(**kw):
    r = RunResult.from_config(WorkloadConfig(structure="hash", scheme="ebr", threads=2))
    for k, v in kw.items():
        setattr(r, k, v)
    return r


def test_emit_summary_row():
    rs = [_fake(repeat_index=i, throughput=t, peak_live=p) for i, (t, p) in enumerate([(100.0, 10), (200.0, 30)])]
    rs.append(_fake(threads=4, throughput=7.0))
    recs = records(rs)
    assert [r["row"] for r in recs] == ["run", "run", "summary", "run"]
    summ = recs[2]
    assert summ["throughput"] == 150.0
    assert summ["repeat_index"] == 2
    assert summ["throughput_std"] == pytest.approx(70.7106781, rel=1e-6)
    rows = list(csv.DictReader(io.StringIO(emit(rs, "csv"))))
    assert list(rows[0]) == CSV_FIELDS
    assert len(rows) == 4
    assert json.loads(emit(rs, "json"))[2]["row"] == "summary"
    with pytest.raises(ValueError):
        emit(rs, "xml")


def test_csv_carries_every_result_field():
    assert set(RESULT_FIELDS) - {"errors"} <= set(CSV_FIELDS)


@pytest.mark.parametrize("structure", ["bst", "dlqueue"])
def test_single_thread_fixed_ops_is_deterministic(structure):
    cfg = dict(structure=structure, scheme="rc-ebr", threads=1, init_size=64, update_pct=50, ops_per_thread=2000, seed=11)
    a, b = run(WorkloadConfig(**cfg)), run(WorkloadConfig(**cfg))
    for f in ("total_ops", "inserts", "removes", "lookups", "enqueues", "dequeues", "reachable", "final_live"):
        assert getattr(a, f) == getattr(b, f)
    assert a.total_ops == 2000
    assert a.final_live == 0 and a.ok


def test_op_counts_add_up():
    r = run(WorkloadConfig(structure="list", scheme="hp", threads=2, init_size=32, update_pct=40, rq_pct=20, ops_per_thread=500))
    assert r.inserts + r.removes + r.lookups + r.range_queries == r.total_ops == 1000


def test_repeat_indices():
    rs = run_repeated(WorkloadConfig(structure="hash", scheme="ibr", threads=1, init_size=16, ops_per_thread=100), 3)
    assert [r.repeat_index for r in rs] == [0, 1, 2]


def test_timed_run_reports_memory():
    r = run(WorkloadConfig(structure="bst", scheme="rc-ibr", threads=2, duration_s=0.3, init_size=200))
    assert r.throughput > 0 and r.peak_live >= r.mean_live > 0
    assert r.mean_bytes == pytest.approx(r.mean_live * node_bytes("bst", "rc-ibr"))
    assert r.final_live == 0


def test_cli_bench_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    rc = main(["bench", "--structure", "hash", "--scheme", "rc-hp", "--threads", "1", "--init-size", "32",
               "--ops-per-thread", "200", "--repeat", "2", "--format", "json", "--out", str(out)])
    assert rc == 0
    recs = json.loads(out.read_text())
    assert [r["row"] for r in recs] == ["run", "run", "summary"]


def test_cli_usage_errors(capsys):
    assert main(["bench", "--structure", "hash", "--rq-pct", "10"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["bench", "--repeat", "0"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["bench", "--scheme", "nope"])
    assert e.value.code == 2


def test_cli_report_writes_figures(tmp_path):
    d = tmp_path / "rep"
    rc = main(["report", "--structure", "bst,hash", "--scheme", "ebr,rc-ebr", "--threads", "1,2",
               "--init-size", "32", "--ops-per-thread", "100", "--out-dir", str(d)])
    assert rc == 0
    for name in ("results.csv", "results.json", "bst.png", "hash.png"):
        assert (d / name).stat().st_size > 0
    with open(d / "bst.png", "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"
    rows = list(csv.DictReader(open(d / "results.csv")))
    assert len(rows) == 8


def test_cli_explore_and_contract(capsys):
    assert main(["explore", "--start", "1", "--program", "dec;load"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]
    assert main(["explore", "--start", "1", "--program", "dec;inc,load,dec"]) == 1
    capsys.readouterr()
    assert main(["explore", "--start", "1", "--program", "dec;inc,load,dec", "--relaxed"]) == 0
    capsys.readouterr()
    assert main(["contract", "--backend", "ebr", "--preemptions", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["backends"][0]["ok"]


def test_cli_stress(capsys):
    rc = main(["stress", "--structure", "dlqueue", "--scheme", "rc-ebr", "--threads", "3", "--duration", "0.5",
               "--init-size", "8", "--update-pct", "50", "--audit-every", "0.1"])
    rep = json.loads(capsys.readouterr().out)
    assert rc == 0 and rep["ok"] and rep["audits"] > 0


def test_op_floor_counts_measured_ops():
    r = run(WorkloadConfig(structure="hash", scheme="ebr", threads=2, duration_s=0.2, init_size=16, min_total_ops=20_000))
    assert r.total_ops >= 20_000
