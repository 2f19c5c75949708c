from __future__ import annotations

import csv
import json

import pytest

from kummer.cli import main


def run(capsys, *argv, env=None):
    code = main(list(argv), env=env or {})
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_raabe_converges(capsys):
    code, out, _ = run(capsys, "analyze", "--a", "1/n^2", "--test", "raabe", "--c", "1", "--window", "2:10000")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1
    v = doc["results"][0]["verdict"]
    assert v["status"] == "holds-on-window" and v["conclusion"] == "converges"
    assert v["hypotheses"]


def test_analyze_weighted_div_auto_witness(capsys):
    code, out, _ = run(capsys, "analyze", "--a", "1/n", "--test", "weighted-div", "--c", "1", "--witness", "auto",
                       "--window", "1:1000", "--assert-qrecip-divergent", "probe")
    assert code == 0
    r = json.loads(out)["results"][0]
    assert r["verdict"]["status"] == "holds-on-window"
    assert "Σa_n diverges" in r["verdict"]["consequences"]
    assert r["witness"]["provenance"] == "weighted-partial"


def test_analyze_pole_is_evaluation_error(capsys):
    code, _, err = run(capsys, "analyze", "--a", "1/(n-3)", "--test", "raabe", "--window", "3:10")
    assert code == 2 and "n = 3" in err


def test_analyze_several_tests_and_trace(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, out, _ = run(capsys, "analyze", "--a", "1/2^n", "--test", "kummer-conv", "--test", "raabe",
                       "--witness", "1", "--mode", "exact", "--window", "1:20", "--emit-trace", str(trace))
    assert code == 0
    assert [r["test"] for r in json.loads(out)["results"]] == ["kummer-conv", "raabe"]
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["n", "value", "bound"]
    assert len(rows) == 1 + 2 * 20


def test_usage_errors_exit_1(capsys):
    assert run(capsys, "analyze", "--a", "1/n^", "--test", "raabe")[0] == 1
    assert run(capsys, "analyze", "--a", "1/n", "--test", "weighted-div")[0] == 1
    assert run(capsys, "analyze", "--a", "1/n", "--test", "raabe", "--window", "5")[0] == 1
    with pytest.raises(SystemExit) as info:
        main(["analyze", "--a", "1/n", "--test", "ratio"], env={})
    assert info.value.code == 1


def test_bertrand_precondition_exit_1(capsys):
    code, _, err = run(capsys, "analyze", "--a", "1/(n*ln(n)^3)", "--test", "bertrand", "--theta-n", "1",
                       "--window", "10:100")
    assert code == 1 and "theta" in err


def test_witness_div_sample(capsys):
    code, out, _ = run(capsys, "witness", "--a", "1/n", "--kind", "div", "--mode", "exact", "--window", "1:3")
    doc = json.loads(out)
    assert code == 0 and doc["residual"] == "0"
    assert doc["witness"]["sample"] == {"1": "1", "2": "3", "3": "11/2"}


def test_witness_geometric_weighted_conv(capsys):
    code, out, _ = run(capsys, "witness", "--a", "1/2^n", "--c", "1", "--kind", "weighted-conv", "--sum", "1",
                       "--mode", "exact", "--window", "1:30")
    doc = json.loads(out)
    assert code == 0 and doc["residual"] == "0"
    assert set(doc["witness"]["sample"].values()) == {"1"}


def test_witness_refuses_divergent_sum(capsys):
    code, _, err = run(capsys, "witness", "--a", "1/n", "--kind", "weighted-conv", "--sum", "10")
    assert code == 2 and "converges" in err


def test_witness_trace(capsys, tmp_path):
    trace = tmp_path / "w.csv"
    code, _, _ = run(capsys, "witness", "--a", "1/n", "--kind", "div", "--mode", "exact", "--window", "1:4",
                     "--emit-trace", str(trace))
    rows = list(csv.reader(trace.open()))
    assert code == 0 and rows[0] == ["n", "value", "bound"]
    assert [r[1] for r in rows[1:3]] == ["1", "3"]


def _catalog(path, label):
    path.write_text(f'[[entry]]\nid = "cube"\nexpr = "1/n^3"\nlabel = "{label}"\n')
    return str(path)


def test_corpus_contradiction_exit_3(capsys, tmp_path):
    corpus = _catalog(tmp_path / "c.toml", "diverges")
    code, out, err = run(capsys, "corpus", "--corpus", corpus, "--tests", "raabe", "--window", "1:64")
    assert code == 3 and "CONTRADICTION cube raabe" in err
    assert json.loads(out)["summary"]["contradictions"] == 1


def test_corpus_csv(capsys, tmp_path):
    corpus = _catalog(tmp_path / "c.toml", "converges")
    code, out, _ = run(capsys, "corpus", "--corpus", corpus, "--tests", "raabe,weighted-conv", "--window", "1:64",
                       "--format", "csv")
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and [r["test"] for r in rows] == ["raabe", "weighted-conv"]


def test_setting_precedence(capsys, tmp_path):
    cfg = tmp_path / "k.toml"
    cfg.write_text('digits = 30\nmode = "mp"\n[witness]\nwindow = "1:2"\n')
    base = ("witness", "--a", "1/n", "--kind", "div", "--config", str(cfg))
    doc = json.loads(run(capsys, *base)[1])
    assert doc["numeric"]["digits"] == 30 and doc["request"]["window"] == [1, 2]
    doc = json.loads(run(capsys, *base, env={"KUMMER_DIGITS": "40", "KUMMER_WINDOW": "1:3"})[1])
    assert doc["numeric"]["digits"] == 40 and doc["request"]["window"] == [1, 3]
    doc = json.loads(run(capsys, *base, "--digits", "60", env={"KUMMER_DIGITS": "40"})[1])
    assert doc["numeric"]["digits"] == 60


def test_exact_reports_are_byte_identical(capsys):
    argv = ("analyze", "--a", "1/(n*(n+1))", "--test", "raabe", "--test", "weighted-conv", "--sum", "1",
            "--mode", "exact", "--window", "1:50")
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0 and first == second


def test_irrational_sum_in_exact_mode_exit_2(capsys):
    code, _, err = run(capsys, "analyze", "--a", "1/n^2", "--test", "weighted-conv", "--sum", "pi^2/6",
                       "--mode", "exact", "--window", "1:50")
    assert code == 2 and "not rational" in err


def test_output_file(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    code, out, _ = run(capsys, "witness", "--a", "1/n", "--kind", "div", "--output", str(out_file))
    assert code == 0 and out == ""
    assert json.loads(out_file.read_text())["command"] == "witness"
