import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from sshspectra import cli
from sshspectra.ds_processes import SandwichReport

UNB = """model.t_dist = atoms: 1:1
model.m_dist = atoms: 2:0.25, 0.5:0.75
"""
BAL = """model.t_dist = atoms: 2:0.5, 0.5:0.5
model.m_dist = atoms: 2:0.5, 0.5:0.5
"""


def run(tmp_path, experiment, text, *extra):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(text)
    out = tmp_path / f"{experiment}.csv"
    code = cli.main([experiment, "--config", str(cfg), "--output", str(out), "--no-timestamps", *extra])
    return code, out.read_text() if out.exists() else ""


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_header_and_lyapunov_rows(tmp_path):
    code, text = run(tmp_path, "lyapunov", UNB + "run.eps = 0\nrun.n_steps = 100000\nrun.seeds = 3\n")
    assert code == 0
    head = text.splitlines()
    assert head[0].startswith("# experiment=lyapunov config_sha256=") and "master_seed=0" in head[0]
    assert head[1].startswith("# units:")
    rows = table(text)
    assert len(rows) == 4 and rows[-1]["seed"] == "-1"
    pooled = float(rows[-1]["lyapunov"])
    se = float(rows[-1]["lyapunov_stderr"])
    assert abs(pooled - 0.5 * math.log(2)) < 4 * se
    assert all(r["idos_delta"] == "0" for r in rows)
    assert "inf" not in text and "nan" not in text


def test_nu_solve(tmp_path):
    code, text = run(tmp_path, "nu-solve", UNB)
    assert code == 0
    assert float(table(text)[0]["nu"]) == pytest.approx(math.log2(3), abs=1e-12)


def test_floats_use_17_digits():
    assert cli._fmt(0.1) == "0.10000000000000001"
    assert cli._fmt(np.float64(1 / 3)) == format(1 / 3, ".17g")
    with pytest.raises(cli.InvariantViolation):
        cli._fmt(math.inf)


def test_rerun_and_workers_byte_identical(tmp_path):
    text = UNB + "run.eps = 1e-2, 3e-3\nrun.n_steps = 20000\nrun.seeds = 3\n"
    _, a = run(tmp_path, "idos-sweep", text)
    _, b = run(tmp_path, "idos-sweep", text)
    _, c = run(tmp_path, "idos-sweep", text, "--workers", "2")
    assert a == b == c


def test_master_seed_changes_numbers_and_hash(tmp_path):
    text = UNB + "run.eps = 1e-2\nrun.n_steps = 20000\n"
    _, a = run(tmp_path, "idos-sweep", text)
    _, b = run(tmp_path, "idos-sweep", text, "--master-seed", "7")
    assert a.splitlines()[0] != b.splitlines()[0]
    assert table(a)[0]["idos_delta"] != table(b)[0]["idos_delta"]


def test_task_seed_mixing():
    s = {cli.task_seed(0, i) for i in range(1000)}
    assert len(s) == 1000 and all(0 <= x < 2 ** 64 for x in s)
    assert cli.task_seed(5, 3) == cli.task_seed(5, 3) != cli.task_seed(3, 5)


@pytest.mark.parametrize("text, needle", [
    (UNB + "model.bogus = 3\n", "line 3: unknown key 'model.bogus'"),
    (UNB + "run.eps = 0.5\n", "eps_max"),
    (UNB + "run.eps = 1e-3\nrun.eps = 1e-2\n", "duplicate key"),
    (UNB + "run.eps = 1e-3\nrun.n_steps = 10\n", ">= 1000"),
    (UNB + "run.eps = 1e-3\nrun.n_steps = 1000, 2000\n", "2 entries for 1 energies"),
    (UNB + "this line has no equals\n", "line 3"),
    ("model.t_dist = gauss: 0, 1\nmodel.m_dist = atoms: 1:1\nrun.eps=1e-3\n", "line 1"),
])
def test_config_errors(tmp_path, capsys, text, needle):
    code, _ = run(tmp_path, "idos-sweep", text)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_eps_zero_only_for_lyapunov(tmp_path):
    assert run(tmp_path, "idos-sweep", UNB + "run.eps = 0\n")[0] == 2


def test_failure_marker_on_nonfinite(tmp_path, monkeypatch):
    def bad(cfg):
        return ["eps", "value"], [[1e-3, math.inf]], []
    monkeypatch.setitem(cli.RUNNERS, "classify", bad)
    code, text = run(tmp_path, "classify", UNB + "run.eps = 1e-3\n")
    assert code == 3
    assert text.splitlines()[-1].startswith("FAILED,")


def test_sandwich_violation_flushes_partial_rows(tmp_path, monkeypatch):
    def fake(spec, eps, seed, lam=None):
        return SandwichReport(eps, seed, N1=3, N2=9, T_slower=2, T_faster=1, time_violation=True)
    monkeypatch.setattr(cli, "sandwich_check", fake)
    code, text = run(tmp_path, "comparison-verify", BAL + "run.eps = 1e-4\nrun.seeds = 2\nrun.samples = 500\n")
    assert code == 3
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert rows[1].startswith("comparison-verify,") and rows[1].split(",")[3] == "2"
    assert rows[-1].startswith("FAILED,sandwich violated")


def test_nu_fit_without_signal_fails_cleanly(tmp_path):
    code, text = run(tmp_path, "nu-fit", UNB + "run.eps = 1e-4, 2e-4\nrun.n_steps = 2000\n")
    assert code == 3 and "FAILED" in text


def test_nu_fit_small(tmp_path):
    code, text = run(tmp_path, "nu-fit", UNB + "run.eps_lo = 1e-2\nrun.eps_hi = 0.1\nrun.eps_count = 4\n"
                     "run.n_steps = 200000\n")
    assert code == 0
    rows = table(text)
    assert len(rows) == 4 and all(r["in_fit"] == "1" for r in rows)
    assert abs(float(rows[0]["slope"]) - math.log2(3)) < 0.5


def test_spike_check_small(tmp_path):
    code, text = run(tmp_path, "spike-check", BAL + "run.eps = 1e-3\nrun.n_steps = 200000\n")
    assert code == 0
    r = table(text)[0]
    assert float(r["prediction"]) == pytest.approx(math.log(2) ** 2 / 2)
    assert abs(float(r["rel_deviation"])) < 0.25


def test_oracle_compare_small(tmp_path):
    code, text = run(tmp_path, "oracle-compare", UNB + "run.eps = 1e-2\nrun.seeds = 2\nrun.N = 5000\n")
    assert code == 0
    assert all(r["within_slack"] == "1" for r in table(text))


def test_passage_stats_small(tmp_path):
    code, text = run(tmp_path, "passage-stats", BAL + "run.eps = 1e-3\nrun.samples = 2000\n")
    assert code == 0
    rows = table(text)
    assert [r["kind"] for r in rows] == ["slower", "faster"]
    assert float(rows[1]["mean_T"]) <= float(rows[0]["mean_T"])


def test_comparison_verify_balanced_blank_exp(tmp_path):
    code, text = run(tmp_path, "comparison-verify", BAL + "run.eps = 1e-4\nrun.seeds = 5\nrun.samples = 1000\n")
    assert code == 0
    r = table(text)[0]
    assert r["violations"] == "0" and r["exp_residual"] == "" and r["stopping_passed"] == "1"


def test_classify_labels(tmp_path):
    code, text = run(tmp_path, "classify", UNB + "run.eps = 1e-6, 0.5, 1e-2\n")
    assert code == 0
    assert [r["label"] for r in table(text)] == ["pseudogap-like", "spike-like", "boundary"]


def test_console_script(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(UNB)
    out = tmp_path / "n.csv"
    p = subprocess.run([sys.executable, "-m", "sshspectra.cli", "nu-solve", "--config", str(cfg),
                        "--output", str(out)], capture_output=True, text=True)
    assert p.returncode == 0 and "nu = 1.5849625007" in p.stdout
    assert table(out.read_text())[0]["timestamp"]
