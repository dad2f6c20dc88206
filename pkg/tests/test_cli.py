import csv
import json

import numpy as np
import pytest

from hybridfmm.cli import CSV_COLUMNS, main, read_particles, sweep_sizes


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture(autouse=True)
def cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HYBRIDFMM_CACHE_DIR", str(tmp_path / "cache"))


def test_run_fmm_accuracy(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["-q", "run", "--n", "10000", "--dist", "cube", "--method", "fmm", "--p", "10",
                 "--theta", "0.5", "--ncrit", "200", "--seed", "42", "--check-samples", "1000",
                 "--out", str(out)]) == 0
    (rec,) = rows(out)
    assert list(rec) == CSV_COLUMNS
    assert float(rec["err_pot_l2"]) <= 1e-3
    assert rec["method"] == "fmm" and rec["n"] == "10000" and rec["schema_version"] == "1"


def test_append_only_single_header(tmp_path):
    out = tmp_path / "r.csv"
    for method in ("direct", "treecode"):
        assert main(["-q", "run", "--n", "300", "--method", method, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 3
    assert sum(line.startswith("schema_version") for line in lines) == 1


def test_schema_mismatch_is_runtime_error(tmp_path):
    out = tmp_path / "bad.csv"
    out.write_text("a,b\n1,2\n")
    assert main(["-q", "run", "--n", "10", "--out", str(out)]) == 1


def test_empty_run(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["-q", "run", "--n", "0", "--method", "fmm", "--out", str(out)]) == 0
    (rec,) = rows(out)
    assert rec["n"] == "0" and rec["err_pot_l2"] == ""


def test_forced_hybrid_matches_direct(tmp_path, capsys):
    timings = tmp_path / "forced.json"
    timings.write_text(json.dumps({"p": 8, "t_p2p_pair_ns": 0.0, "t_m2p_target_ns": 1e6,
                                   "t_m2l_call_ns": 1e6}))
    from hybridfmm import Config, KernelTimings, cube, evaluate, load_timings

    forced = load_timings(timings, 8)
    a = evaluate(cube(100, 42), Config(method="hybrid"), forced).field
    b = evaluate(cube(100, 42), Config(method="direct")).field
    assert np.max(np.abs(a.potential - b.potential) / np.abs(b.potential)) <= 1e-12
    out = tmp_path / "r.csv"
    for method in ("direct", "hybrid"):
        assert main(["-q", "run", "--n", "100", "--method", method, "--timings", str(timings),
                     "--check-samples", "100", "--out", str(out)]) == 0
    d, h = rows(out)
    assert float(h["err_pot_l2"]) <= 1e-12 and h["n_m2l_calls"] == "0"


def test_hybrid_cache_respected(tmp_path, caplog):
    caplog.set_level("INFO")
    args = ["run", "--n", "500", "--method", "hybrid", "--p", "4", "--ncrit", "16",
            "--repetitions", "3", "--out", str(tmp_path / "r.csv")]
    assert main(args) == 0
    assert "measuring kernel timings" in caplog.text
    caplog.clear()
    assert main(args) == 0
    assert "no re-measurement" in caplog.text and "measuring kernel timings" not in caplog.text


def test_tune_writes_file(tmp_path, capsys):
    path = tmp_path / "t.json"
    assert main(["tune", "--p", "4", "--ncrit", "16", "--repetitions", "3",
                 "--timings", str(path)]) == 0
    doc = json.loads(path.read_text())
    assert doc["p"] == 4 and doc["t_m2l_call_ns"] > 0 and "host" in doc
    assert "t_p2p_pair" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["tune", "--p", "8", "--repetitions", "2"],
    ["run", "--p", "0"],
    ["run", "--theta", "1.5"],
    ["run", "--n", "-3"],
    ["run", "--method", "barnes"],
    ["sweep", "--n-min", "100", "--n-max", "10"],
    ["sweep", "--factor", "1.0"],
    ["bogus"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        code = main(["-q", *argv])
        raise SystemExit(code)
    assert exc.value.code == 2


def test_input_csv(tmp_path):
    src = tmp_path / "p.csv"
    src.write_text("x,y,z,q\n0,0,0,1\n1,0,0,1\n0,1,0,1\n")
    p = read_particles(src)
    assert len(p) == 3
    out = tmp_path / "r.csv"
    assert main(["-q", "run", "--input", str(src), "--method", "direct", "--out", str(out)]) == 0
    assert rows(out)[0]["n"] == "3"
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y,z,q\n0,0,nan,1\n")
    assert main(["-q", "run", "--input", str(bad), "--out", str(out)]) == 1
    coincident = tmp_path / "same.csv"
    coincident.write_text("x,y,z,q\n0,0,0,1\n0,0,0,1\n")
    assert main(["-q", "run", "--input", str(coincident), "--method", "direct",
                 "--out", str(out)]) == 1


def test_sweep_records(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["-q", "sweep", "--n-min", "1000", "--n-max", "4000", "--factor", "2",
                 "--methods", "fmm,treecode,hybrid", "--dist", "shell", "--ncrit", "20",
                 "--p", "4", "--repetitions", "3", "--out", str(out)]) == 0
    recs = rows(out)
    assert [(r["n"], r["method"]) for r in recs] == [
        (n, m) for n in ("1000", "2000", "4000") for m in ("fmm", "treecode", "hybrid")]
    assert {r["seed"] for r in recs} == {"42"}


def test_sweep_sizes():
    assert sweep_sizes(10_000, 100_000, 2.0) == [10_000, 20_000, 40_000, 80_000]


def test_stdout_when_no_out(capsys):
    assert main(["-q", "run", "--n", "50", "--method", "direct"]) == 0
    text = capsys.readouterr().out.splitlines()
    assert text[0] == ",".join(CSV_COLUMNS) and len(text) == 2


def test_check_passes_and_fault_is_caught(capsys):
    assert main(["check", "--seed", "3"]) == 0
    assert "7/7 checks passed" in capsys.readouterr().out
    assert main(["check", "--inject-fault"]) == 1
    out = capsys.readouterr().out
    assert "counting coverage" in out and "FAIL" in out


@pytest.mark.parametrize("seed", range(10))
def test_check_across_seeds(seed):
    assert main(["-q", "check", "--seed", str(seed), "--n", "400"]) == 0
