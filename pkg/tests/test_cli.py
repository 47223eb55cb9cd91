import subprocess
import sys

import pytest
import tomli_w

from lure_smo import cli
from lure_smo.runner import PRECISION_ENV, trajectory_header
from lure_smo.scenarios import builtin


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def short_scenario(tmp_path, name="example1", t_end=1.0, dt=1e-3):
    d = builtin(name).data
    d["scheme"]["t_end"] = t_end
    d["scheme"]["dt"] = dt
    path = tmp_path / f"{name}.toml"
    path.write_text(tomli_w.dumps(d))
    return path


def test_verify_example1(capsys):
    code, out, _ = run(["verify", "example1"], capsys)
    assert code == 0
    assert "Eq.(7): PASS (witness 0.000)" in out
    assert "Eq.(8): PASS (residual 0)" in out
    assert "eps* (largest admissible) = 2" in out
    assert "suggested mu" in out


def test_verify_example2_discrepancy(capsys):
    code, out, _ = run(["verify", "example2-xi1"], capsys)
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("Eq.(8)"))
    assert "PASS" in line and float(line.split("residual ")[1].rstrip(")")) <= 5e-3
    assert "printed eps exceeds eps*" in out


def test_verify_infeasible(tmp_path, capsys):
    path = short_scenario(tmp_path)
    d = builtin("example1").data
    d["system"]["L_f"] = 100.0
    path.write_text(tomli_w.dumps(d))
    code, out, _ = run(["verify", str(path)], capsys)
    assert code == 2
    assert "Eq.(7): FAIL" in out and "max eigenvalue" in out


def test_simulate_writes_artifacts(tmp_path, capsys):
    code, out, _ = run(
        ["simulate", "example1", "--out", str(tmp_path), "--dt", "1e-4", "--t-end", "0.2"], capsys
    )
    assert code == 0
    traj = tmp_path / "example1_trajectory.csv"
    lines = traj.read_text().splitlines()
    assert lines[0] == ",".join(trajectory_header(3))
    assert lines[0] == "t,x1,x2,x3,xh1,xh2,xh3,e1,e2,e3,norm_e,ey,sqrtV,env_total,env_a,in_omega"
    assert len(lines) - 1 == 2001
    report = (tmp_path / "example1_report.txt").read_text()
    assert "Omega_hi = 3.2016" in report
    assert (tmp_path / "example1_envelopes.csv").exists()
    assert (tmp_path / "plot_example1.py").read_text().startswith('"""Plot')
    # shortest round-trip representation
    row = lines[1].split(",")
    assert row[:4] == ["0.0", "1.0", "-1.0", "2.0"]
    for tok in lines[500].split(",")[:-1]:
        assert repr(float(tok)) == tok


def test_simulate_deterministic(tmp_path, capsys):
    for sub in ("a", "b"):
        run(["simulate", "example2-xi2", "--out", str(tmp_path / sub), "--t-end", "0.5"], capsys)
    a = (tmp_path / "a" / "example2-xi2_trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "example2-xi2_trajectory.csv").read_bytes()
    assert a == b


def test_precision_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(PRECISION_ENV, "5")
    run(["simulate", "example1", "--out", str(tmp_path), "--dt", "1e-2", "--t-end", "1"], capsys)
    row = (tmp_path / "example1_trajectory.csv").read_text().splitlines()[50].split(",")
    assert all(tok == "%.5g" % float(tok) for tok in row[:-1])
    assert any(len(tok) > 3 for tok in row)


def test_scheme_and_sigma_options(tmp_path, capsys):
    code, out, _ = run(
        ["simulate", "example1", "--out", str(tmp_path), "--dt", "1e-3", "--t-end", "1",
         "--scheme", "resolvent", "--sigma", "1e-2"],
        capsys,
    )
    assert code == 0
    assert "semi-implicit-euler-resolvent" in out


def test_bounds_from_csv(tmp_path, capsys):
    run(["simulate", "example1", "--out", str(tmp_path), "--t-end", "3"], capsys)
    path = short_scenario(tmp_path, t_end=3.0, dt=1e-4)
    code, out, _ = run(["bounds", str(path), "--traj", str(tmp_path / "example1_trajectory.csv")], capsys)
    assert code == 0
    assert "envelope dominance: PASS" in out and "Omega_hi = 3.2016" in out


def test_final_error_report_line(tmp_path, capsys):
    code, out, _ = run(["simulate", "example2-xi2", "--out", str(tmp_path), "--t-end", "20"], capsys)
    assert code == 0
    assert "final error ||e(20)||" in out and "PASS (threshold 0.1)" in out


def test_disabled_assumption_check_reports_eq7(tmp_path, capsys):
    d = builtin("example1").data
    d["system"]["L_f"] = 100.0
    d["checks"]["assumptions"] = False
    d["scheme"].update(t_end=0.5, dt=1e-3)
    path = tmp_path / "bad.toml"
    path.write_text(tomli_w.dumps(d))
    code, out, _ = run(["simulate", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code != 0
    assert "Eq.(7)" in (tmp_path / "o" / "example1_report.txt").read_text()


def test_enabled_assumption_check_exit_2(tmp_path, capsys):
    d = builtin("example1").data
    d["system"]["L_f"] = 100.0
    path = tmp_path / "bad.toml"
    path.write_text(tomli_w.dumps(d))
    code, out, _ = run(["simulate", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "simulation skipped" in out


def test_bound_violation_exit_3(tmp_path, capsys):
    path = short_scenario(tmp_path, name="example2-xi2")
    d = builtin("example2-xi2").data
    d["scheme"].update(t_end=1.0)
    d["checks"]["final_error_max"] = 1e-9
    path.write_text(tomli_w.dumps(d))
    code, out, _ = run(["simulate", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 3 and "FAIL" in out


def test_divergence_exit_4(tmp_path, capsys):
    d = builtin("example1").data
    d["system"]["A"] = [[900.0, 0, 0], [0, 900.0, 0], [0, 0, 900.0]]
    d["checks"]["assumptions"] = False
    d["scheme"].update(t_end=5.0, dt=1e-2)
    path = tmp_path / "blowup.toml"
    path.write_text(tomli_w.dumps(d))
    code, out, _ = run(["simulate", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 4 and "diverged" in out.lower()


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate", "example1"])
    assert info.value.code == 1
    code, _, err = run(["verify", "nope"], capsys)
    assert code == 1 and "builtin" in err


def test_export(capsys):
    code, out, _ = run(["export", "example2-xi1"], capsys)
    assert code == 0 and 'name = "example2-xi1"' in out


@pytest.mark.slow
def test_run_all_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lure_smo.cli", "run-all", "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=600,
    )
    assert proc.returncode == 0, proc.stderr
    summary = (tmp_path / "summary.txt").read_text()
    for name in ("example1", "example2-xi1", "example2-xi2"):
        assert f"== {name}: exit 0" in summary
        assert (tmp_path / name / f"{name}_trajectory.csv").exists()
