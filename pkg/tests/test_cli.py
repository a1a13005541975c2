import json
import random

import pytest

from guardagg.catalog import write_csv
from guardagg.cli import main
from guardagg.workload import fkpk_database

from conftest import DATA

MEDIAN = str(DATA / "queries" / "median_acctbal.sql")
SUITE = DATA / "suite"


def _suite_query(name):
    return str(SUITE / "queries" / name)


def test_run_compare_oracle_on_worked_example(capsys):
    code = main(["run", "--data", str(DATA / "suppliers"), "--query", MEDIAN,
                 "--mode", "baseline", "--mode", "guao", "--mode", "guao-plus", "--compare-oracle"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines() == ["median", "20", "ALL MODES AGREE: MEDIAN=20"]


def test_run_writes_stats_and_output(tmp_path, capsys):
    stats, output = tmp_path / "s.json", tmp_path / "r.csv"
    code = main(["run", "--data", str(DATA / "chain5"), "--query", _suite_query("07_path03.sql"),
                 "--stats", str(stats), "--output", str(output), "--reps", "3", "--warmup", "1"])
    assert code == 0 and capsys.readouterr().out == ""
    assert output.read_text() == "count\n1\n"
    doc = json.loads(stats.read_text())
    assert doc["peak_materialised_tuples"] == 4 and doc["runs"] == 3
    assert {"mean_ms", "std_ms", "operators", "mode", "variant"} <= set(doc)


def test_run_several_modes_writes_stats_list(tmp_path):
    stats = tmp_path / "s.json"
    assert main(["run", "--data", str(DATA / "suppliers"), "--query", MEDIAN,
                 "--mode", "guao", "--mode", "guao-plus", "--variant", "merge",
                 "--stats", str(stats), "--output", str(tmp_path / "r.csv")]) == 0
    doc = json.loads(stats.read_text())
    assert [d["mode"] for d in doc] == ["guao", "guao-plus"]
    assert all(d["variant"] == "merge" for d in doc)


def test_explain_prints_tree_and_plans(tmp_path, capsys):
    for rel in fkpk_database(random.Random(3)).relations.values():
        write_csv(rel, tmp_path / f"{rel.name}.csv")
    assert main(["run", "--data", str(tmp_path), "--query", MEDIAN, "--explain",
                 "--fkpk", str(DATA / "constraints" / "tree_keys.txt")]) == 0
    err = capsys.readouterr().err
    assert "-- join tree" in err and "digraph" in err
    assert "-- after FK/PK rewriting (guao-plus)" in err and "SemiJoin" in err


def test_classify_reports_class_and_guards(capsys):
    assert main(["classify", "--data", str(SUITE), "--query", _suite_query("03_min_sum_by_nation.sql")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["label"] == "piecewise-guarded" and doc["root_guard"] == "supplier"
    assert main(["classify", "--data", str(SUITE), "--query", _suite_query("04_triangle.sql")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["label"] == "not-applicable: cyclic" and doc["reason"] == "cyclic"


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--data", str(SUITE), "--query", _suite_query("04_triangle.sql")]) == 4
    bad = tmp_path / "bad.sql"
    bad.write_text("SELECT FROM WHERE")
    assert main(["run", "--data", str(SUITE), "--query", str(bad)]) == 3
    assert main(["run", "--data", str(SUITE)]) == 2
    assert main(["run", "--data", str(SUITE), "--query", MEDIAN, "--budget", "0"]) == 2
    assert main(["run", "--data", str(tmp_path / "missing"), "--query", MEDIAN]) == 1
    assert main(["run", "--data", str(DATA / "suppliers"), "--query", MEDIAN,
                 "--mode", "baseline", "--budget", "50"]) == 5
    assert "budget exceeded" in capsys.readouterr().err


def test_generate_and_bench(tmp_path, capsys):
    out = tmp_path / "q"
    assert main(["generate", "--kind", "path", "--size", "1", "--size", "3", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["path-01.sql", "path-03.sql"]
    assert main(["generate", "--kind", "tree", "--size", "0", "--out", str(out)]) == 1
    capsys.readouterr()
    report = tmp_path / "bench.csv"
    assert main(["bench", str(out / "path-01.sql"), str(out / "path-03.sql"),
                 "--data", str(DATA / "chain5"), "--out", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "query,mode,status,mean_ms,std_ms,peak_materialised_tuples,result"
    assert len(lines) == 7
    rows = [line.split(",") for line in lines[1:]]
    assert {(r[0], r[1], r[2], r[-1]) for r in rows} >= {("path-03.sql", "guao-plus", "ok", "1"),
                                                         ("path-01.sql", "baseline", "ok", "3")}


def test_bench_reports_failures_per_mode(tmp_path, capsys):
    assert main(["bench", _suite_query("04_triangle.sql"), _suite_query("01_median_acctbal.sql"),
                 "--data", str(SUITE), "--mode", "baseline", "--mode", "guao",
                 "--budget", "50"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "04_triangle.sql,guao,not-applicable,,,," in lines
    assert "01_median_acctbal.sql,baseline,budget-exceeded,,,," in lines


def test_load_check(capsys):
    assert main(["load-check", "--data", str(SUITE)]) == 0
    out = capsys.readouterr().out
    assert "supplier:" in out and out.strip().endswith("constraints: 0 unique, 0 foreign keys")
    # the worked data repeats region keys, so the benchmark keys are rejected
    assert main(["load-check", "--data", str(DATA / "suppliers"),
                 "--fkpk", str(DATA / "constraints" / "tpch.txt")]) == 1


@pytest.mark.parametrize("argv", [["--help"], ["run", "--help"]])
def test_help_exits_cleanly(argv, capsys):
    assert main(argv) == 0
    assert "usage" in capsys.readouterr().out
