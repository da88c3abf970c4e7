import csv
import json
import math
import subprocess
import sys

import pytest

from onell.analysis import REPORT_COLUMNS
from onell.cli import main
from onell.harness import PLOT_HEADER, RUNS_HEADER, SUMMARY_HEADER, TRACE_HEADER
from onell.problems import read_instance


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_gen_twice_byte_identical(tmp_path):
    a, b = tmp_path / "a.cnf", tmp_path / "b.cnf"
    assert main(["gen", "--n", "100", "--m", "4000", "--seed", "7", "--out", str(a)]) == 0
    assert main(["gen", "--n", "100", "--m", "4000", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    inst = read_instance(a)
    assert (inst.n, inst.m) == (100, 4000)


def test_gen_to_stdout_and_directory(tmp_path, capsys):
    assert main(["gen", "--n", "20", "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert f"p cnf 20 {math.floor(4 * 20 * math.log(20))}" in text
    assert main(["gen", "--n", "20", "--seed", "3", "--out", str(tmp_path)]) == 0
    (path,) = tmp_path.iterdir()
    assert path.name == "planted_n20_m239_s3.cnf"
    assert path.read_text() == text


def test_run_prints_one_json_record(capsys):
    assert main(["run", "--algo", "opo", "--problem", "onemax", "--n", "1024", "--seed", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1
    rec = json.loads(out[0])
    assert rec["algo"] == "opo" and rec["n"] == 1024 and rec["success"] is True
    assert rec["final_fitness"] == 1024 and rec["evaluations"] > 1024


def test_run_variants(capsys):
    assert main(["run", "--algo", "fixed", "--lam", "4", "--n", "200", "--seed", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["max_lambda"] == 4
    assert main(["run", "--problem", "planted3cnf", "--cap", "2ln", "--n", "64", "--seed", "2",
                 "--budget", "50"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["algo"] == "adaptive-2ln" and rec["m"] == math.floor(4 * 64 * math.log(64))
    assert rec["success"] is False and rec["evaluations"] <= 50 + 2 * 9


def test_trace_writes_csv(tmp_path):
    assert main(["trace", "--problem", "planted3cnf", "--n", "128", "--seed", "4", "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "trace.csv")
    assert tuple(data[0]) == TRACE_HEADER and len(data) > 2
    for it, ev, d, lam, ref in data[1:]:
        assert int(d) >= 1 and float(ref) == pytest.approx(math.sqrt(128 / int(d)))


CONFIG = """\
problem = onemax
sizes = 64, 2^7
algorithms = opo, fixed:3, adaptive:2ln
runs = 4
base_seed = 11
"""


def test_sweep_row_counts(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CONFIG)
    out = tmp_path / "out"
    assert main(["sweep", str(cfg), "--out", str(out)]) == 0
    runs, summary, plot = rows(out / "runs.csv"), rows(out / "summary.csv"), rows(out / "plotdata.csv")
    assert tuple(runs[0]) == RUNS_HEADER and len(runs) - 1 == 3 * 2 * 4
    assert tuple(summary[0]) == SUMMARY_HEADER and len(summary) - 1 == 3 * 2
    assert tuple(plot[0]) == PLOT_HEADER and len(plot) - 1 == 3 * 2


def test_sweep_seed_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CONFIG)
    main(["sweep", str(cfg), "--out", str(tmp_path / "a")])
    main(["sweep", str(cfg), "--out", str(tmp_path / "b"), "--seed", "11"])
    main(["sweep", str(cfg), "--out", str(tmp_path / "c"), "--seed", "12"])
    a = (tmp_path / "a" / "runs.csv").read_bytes()
    assert (tmp_path / "b" / "runs.csv").read_bytes() == a
    assert (tmp_path / "c" / "runs.csv").read_bytes() != a


def test_verify_writes_report(tmp_path):
    inst = tmp_path / "i.cnf"
    main(["gen", "--n", "16", "--m", "4096", "--seed", "5", "--out", str(inst)])
    assert main(["verify", "--instance", str(inst), "--d", "5", "--points", "3", "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "report.csv")
    assert tuple(data[0]) == REPORT_COLUMNS
    assert len(data) - 1 == 3 * 4  # recommended cap for (16, 4096) is 4


def test_verify_generated_with_explicit_point(tmp_path):
    x = "1" * 10 + "0" * 10
    assert main(["verify", "--n", "20", "--m", "300", "--x", x, "--cap", "2", "--sampled",
                 "--samples", "500", "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "report.csv")
    assert len(data) == 3 and all(r[data[0].index("mode")] == "sampled" for r in data[1:]
                                  if r[data[0].index("verdict")] != "skip")


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # --n missing
    assert exc.value.code == 2
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("argv", [
    ["run", "--n", "0"],
    ["run", "--algo", "adaptive", "--cap", "zero", "--n", "10"],
    ["sweep", "/nonexistent/exp.cfg"],
    ["verify", "--n", "12", "--x", "0101"],
    ["verify"],
])
def test_invalid_input_exit_1(argv, capsys, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 1
    captured = capsys.readouterr()
    assert captured.out == "" and captured.err.startswith("error:")


def test_bad_config_file_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem = onemax\nruns = -3\n")
    assert main(["sweep", str(cfg), "--out", str(tmp_path)]) == 1
    assert "runs" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "onell", "run", "--algo", "opo", "--n", "32", "--seed", "1"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and json.loads(ok.stdout)["n"] == 32 and ok.stderr == ""
    bad = subprocess.run([sys.executable, "-m", "onell", "run", "--n", "-5"], capture_output=True, text=True)
    assert bad.returncode == 1 and bad.stdout == "" and "error" in bad.stderr
