import csv
import subprocess
import sys

import numpy as np
import pytest

from burgers_feedback.cli import ConfigError, RunConfig, main, parse_config_text, preset_text


def run(tmp_path, command, *sets, preset=None, name="run"):
    argv = [command]
    if preset:
        argv += ["--preset", preset]
    for item in (f"output_dir={tmp_path}", f"run_name={name}", *sets):
        argv += ["--set", item]
    code = main(argv)
    return code, tmp_path / command / name


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_parse_config_text():
    parsed = parse_config_text("# comment\nnu = 0.5   # trailing\n\ntheta=1\n")
    assert parsed == {"nu": "0.5", "theta": "1"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here")


def test_presets_match_examples():
    one = RunConfig.load(preset="example1")
    assert one.problem.params.nu == 0.1 and one.problem.params.c0 == 0.1
    assert one.problem.dimension == 1 and one.n == 30
    two = RunConfig.load(preset="example2")
    assert two.problem.dimension == 2
    assert (two.problem.params.nu, two.problem.params.w_d) == (1.0, 2.0)
    assert "nu" in preset_text("example1")
    with pytest.raises(ConfigError):
        RunConfig.load(preset="nope")


@pytest.mark.parametrize("override", ["nu=-1", "theta=2", "M=0", "bogus=1", "c0=0",
                                      "dimension=3", "initial_condition=wave", "controlled=maybe"])
def test_invalid_config_exit_2(tmp_path, override, capsys):
    code, _ = run(tmp_path, "simulate", override)
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 6\nM = 4\nT = 0.2\n")
    code = main(["simulate", "--config", str(cfg), "--set", "M=3",
                 "--set", f"output_dir={tmp_path}", "--set", "run_name=f"])
    assert code == 0
    _, rows = read_csv(tmp_path / "simulate" / "f" / "norms.csv")
    assert len(rows) == 4


def test_simulate_outputs(tmp_path):
    code, out = run(tmp_path, "simulate", "n=8", "M=10", "sample_every=4")
    assert code == 0
    header, rows = read_csv(out / "norms.csv")
    assert header == ["t", "l2", "h1", "linf"]
    l2 = np.array([float(r[1]) for r in rows])
    assert np.all(np.diff(l2) <= 1e-12)
    assert read_csv(out / "controls.csv")[0] == ["t", "v0", "v1"]
    header, rows = read_csv(out / "states.csv")
    assert header == ["t", "node", "x", "w"]
    assert sorted({r[0] for r in rows}, key=float) == ["0", "0.40000000000000002",
                                                        "0.80000000000000004", "1"]
    header, rows = read_csv(out / "report.csv")
    assert header == ["step", "newton_iterations", "final_residual_norm", "converged"]
    assert len(rows) == 10 and all(r[3] == "true" for r in rows)


def test_simulate_17_digits(tmp_path):
    _, out = run(tmp_path, "simulate", "n=4", "M=2")
    _, rows = read_csv(out / "norms.csv")
    assert float(rows[1][1]) == float(f"{float(rows[1][1]):.17g}")
    assert len(rows[1][1].replace(".", "").lstrip("0").split("e")[0]) >= 15


def test_simulate_zero_initial_condition(tmp_path):
    _, out = run(tmp_path, "simulate", "initial_condition=zero", "n=6", "M=5")
    _, rows = read_csv(out / "norms.csv")
    assert all(float(v) == 0.0 for r in rows for v in r[1:])


def test_simulate_2d(tmp_path):
    code, out = run(tmp_path, "simulate", "n=3", "M=4", preset="example2")
    assert code == 0
    assert read_csv(out / "controls.csv")[0] == ["t", "v2_l2"]
    assert read_csv(out / "states.csv")[0] == ["t", "node", "x", "y", "w"]


def test_simulate_deterministic(tmp_path):
    _, a = run(tmp_path, "simulate", "n=10", "M=6", name="a")
    _, b = run(tmp_path, "simulate", "n=10", "M=6", name="b")
    for f in ("norms.csv", "controls.csv", "states.csv", "report.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_solver_failure_exit_3(tmp_path, capsys):
    code, out = run(tmp_path, "simulate", "newton_max_iter=1", "n=10", "M=3")
    assert code == 3
    assert "step 0" in capsys.readouterr().err


def test_convergence_small(tmp_path):
    code, out = run(tmp_path, "convergence", "tables=table1,table2,table3",
                    "h_levels=2,4", "h_levels_controls=2,4", "M=5", "T=0.1",
                    "k_levels=2,4", "k_levels_cn=2,4", "n=6", "reference_factor=2")
    assert code == 0
    header, rows = read_csv(out / "table1.csv")
    assert header == ["resolution", "err_l2", "oc_l2", "err_linf", "oc_linf"]
    assert rows[0][2] == "" and rows[1][2] != ""
    assert read_csv(out / "table2.csv")[0] == ["resolution", "err_v0", "oc_v0", "err_v1", "oc_v1"]
    header, rows = read_csv(out / "table3.csv")
    assert header == ["theta", "resolution", "err_linf", "oc_linf"]
    assert [r[0] for r in rows] == ["1", "1", "0.5", "0.5"]


def test_convergence_dimension_mismatch(tmp_path):
    code, _ = run(tmp_path, "convergence", "tables=table2d")
    assert code == 2


def test_decay_small(tmp_path):
    code, out = run(tmp_path, "decay", "n=10", "M=20", "sweeps=gains,theta")
    assert code == 0
    header, rows = read_csv(out / "decay.csv")
    assert header == ["sweep", "value", "alpha_hat", "fit_residual"]
    assert [r[0] for r in rows] == ["gains"] * 3 + ["theta"] * 3
    assert all(float(r[2]) > 0 for r in rows)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "burgers_feedback", "simulate", "--set", "n=4", "--set", "M=2",
         "--set", f"output_dir={tmp_path}", "--set", "run_name=m"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "simulate" / "m" / "norms.csv").exists()
