import json
from pathlib import Path

import pytest

from apmon import fixture_path
from apmon.cli import main

EHS = str(fixture_path("ehs.json"))
BINDINGS = str(fixture_path("ehs_bindings.json"))
GOLDEN = str(Path(__file__).parent / "data" / "tj_golden.log")


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def one_error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1, err
    assert lines[0].startswith("apmon: error:")
    return lines[0]


@pytest.fixture
def rules_dir(tmp_path, capsys):
    pa = tmp_path / "pa.json"
    assert run(capsys, "precalc", "--model", EHS, "--out", str(pa))[0] == 0
    out = tmp_path / "rules"
    assert run(capsys, "compile", "--pa", str(pa), "--model", EHS, "--thresholds", BINDINGS, "--out", str(out))[0] == 0
    return out


# --- precalc -----------------------------------------------------------------------

def test_precalc_ehs(capsys):
    rc, out, _ = run(capsys, "precalc", "--model", EHS)
    assert rc == 0
    ids = [i["id"] for i in json.loads(out)["instances"]]
    assert sorted(ids) == sorted(["Blob(AppServer)", "TJ", "CPS", "Ramp", "MoreIsLess"])


def test_precalc_empty_model(tmp_path, capsys):
    p = tmp_path / "empty.json"
    p.write_text("{}")
    rc, out, _ = run(capsys, "precalc", "--model", str(p))
    assert rc == 0
    assert len(json.loads(out)["instances"]) == 4


def test_precalc_malformed(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"components": [')
    rc, _, err = run(capsys, "precalc", "--model", str(p))
    assert rc != 0
    assert "ModelParseError" in one_error_line(err)


def test_precalc_missing_file(capsys):
    rc, _, err = run(capsys, "precalc", "--model", "/nonexistent/model.json")
    assert rc != 0
    one_error_line(err)


# --- compile -----------------------------------------------------------------------

def test_compile_deterministic(tmp_path, capsys, rules_dir):
    again = tmp_path / "again"
    run(capsys, "compile", "--pa", str(tmp_path / "pa.json"), "--model", EHS, "--thresholds", BINDINGS,
        "--out", str(again))
    first = {p.name: p.read_bytes() for p in rules_dir.iterdir()}
    second = {p.name: p.read_bytes() for p in again.iterdir()}
    assert first == second and "rules.json" in first


def test_compile_tj_listing(rules_dir):
    text = (rules_dir / "TJPropertyModel@UpdateVitalParameters_AVG-RT-k-Property.rule").read_text()
    assert "init=0 size=50 end=1500" in text and "> 0.3" in text


def test_compile_missing_threshold(tmp_path, capsys):
    run(capsys, "precalc", "--model", EHS, "--out", str(tmp_path / "pa.json"))
    th = json.loads(open(BINDINGS).read())
    del th["$Th_OpRtVar"]
    (tmp_path / "th.json").write_text(json.dumps(th))
    rc, _, err = run(capsys, "compile", "--pa", str(tmp_path / "pa.json"), "--model", EHS,
                     "--thresholds", str(tmp_path / "th.json"), "--out", str(tmp_path / "r"))
    assert rc != 0
    assert "$Th_OpRtVar" in one_error_line(err)


def test_compile_missing_argument(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["compile", "--model", EHS])
    assert exc.value.code == 2
    one_error_line(capsys.readouterr().err)


# --- monitor ------------------------------------------------------------------------

def test_monitor_golden_fires_tj(tmp_path, capsys, rules_dir):
    rc, _, err = run(capsys, "monitor", "--rules", str(rules_dir), "--replay", GOLDEN, "--out", str(tmp_path / "m"))
    assert rc == 0
    assert "FIRED\tTJ\t" in err
    report = json.loads((tmp_path / "m" / "report.json").read_text())
    assert "TJ" in {d["instance"] for d in report["fired"]}


def test_monitor_empty_log(tmp_path, capsys, rules_dir):
    (tmp_path / "empty.log").write_text("")
    rc, out, err = run(capsys, "monitor", "--rules", str(rules_dir), "--replay", str(tmp_path / "empty.log"))
    assert rc == 0
    assert [l for l in out.splitlines() if not l.startswith("#")] == []
    assert "FIRED" not in err


def test_monitor_needs_a_source(capsys, rules_dir):
    rc, _, err = run(capsys, "monitor", "--rules", str(rules_dir))
    assert rc != 0
    one_error_line(err)


def test_monitor_refactored_run_does_not_fire_tj(capsys, rules_dir):
    rc, _, err = run(capsys, "monitor", "--rules", str(rules_dir), "--from-sim", "--model", EHS,
                     "--jobs", "200", "--seed", "42", "--refactor", "DbHost=0.01")
    assert rc == 0
    assert "clear\tTJ\t" in err


def test_monitor_malformed_log(tmp_path, capsys, rules_dir):
    (tmp_path / "bad.log").write_text("not a log line\n")
    rc, _, err = run(capsys, "monitor", "--rules", str(rules_dir), "--replay", str(tmp_path / "bad.log"))
    assert rc != 0
    one_error_line(err)


# --- simulate ------------------------------------------------------------------------

def test_simulate_deterministic(capsys):
    args = ("simulate", "--model", EHS, "--jobs", "100", "--seed", "42")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b and "UpdateVitalParameters.start" in a


def test_simulate_mva(capsys):
    rc, out, _ = run(capsys, "simulate", "--model", EHS, "--mva", "--json")
    assert rc == 0
    doc = json.loads(out)
    assert doc["response_time_s"] > 0.7


def test_simulate_bad_refactor(capsys):
    rc, _, err = run(capsys, "simulate", "--model", EHS, "--refactor", "DbHost")
    assert rc != 0
    assert "TARGET=FACTOR" in one_error_line(err)
    rc, _, err = run(capsys, "simulate", "--model", EHS, "--refactor", "Mainframe=0.5")
    assert rc != 0
    one_error_line(err)


def test_simulate_unknown_scenario(capsys):
    rc, _, err = run(capsys, "simulate", "--model", EHS, "--scenario", "Nope")
    assert rc != 0
    one_error_line(err)


# --- report ---------------------------------------------------------------------------

def test_report_series(tmp_path, capsys, rules_dir):
    run(capsys, "monitor", "--rules", str(rules_dir), "--replay", GOLDEN, "--out", str(tmp_path / "m"))
    rc, out, _ = run(capsys, "report", "--verdicts", str(tmp_path / "m" / "verdicts.tsv"))
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("window_start_s,window_end_s,avg_rt_s")
    assert len(lines) == 1 + 30


def test_report_empty(tmp_path, capsys):
    (tmp_path / "v.tsv").write_text("")
    rc, out, _ = run(capsys, "report", "--verdicts", str(tmp_path / "v.tsv"))
    assert rc == 0
    assert out.strip().splitlines() == ["window_start_s,window_end_s,avg_rt_s,throughput_per_s"]


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    one_error_line(capsys.readouterr().err)
