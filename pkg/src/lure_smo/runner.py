"""Scenario execution: verification text, CSV artifacts, exit codes."""

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assumptions import (
    check_assumption3,
    check_assumption5,
    hinf_certificate,
)
from .bounds import capture_time, evaluate_bounds
from .errors import ConfigError, DivergenceError
from .sim import Trajectory, integrate_coupled

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_ASSUMPTION",
    "EXIT_BOUND",
    "EXIT_DIVERGENCE",
    "PRECISION_ENV",
    "RunResult",
    "verify_lines",
    "run_scenario",
    "evaluate_scenario",
    "write_csv",
    "read_trajectory_csv",
    "trajectory_header",
    "uncertainty_along",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSUMPTION = 2
EXIT_BOUND = 3
EXIT_DIVERGENCE = 4

PRECISION_ENV = "LURE_SMO_CSV_DIGITS"


def _formatter():
    digits = os.environ.get(PRECISION_ENV)
    if not digits:
        return repr
    try:
        d = int(digits)
    except ValueError:
        raise ConfigError(f"{PRECISION_ENV} must be an integer, got {digits!r}") from None
    if not 1 <= d <= 17:
        raise ConfigError(f"{PRECISION_ENV} must lie in 1..17, got {d}")
    fmt = f"%.{d}g"
    return lambda v: fmt % v


def write_csv(path, header, columns):
    """Write equally long columns; floats use the shortest round-trip repr.

    Integer-typed columns (numpy int/bool) are written as integers.
    """
    fmt = _formatter()
    cols = []
    for c in columns:
        c = np.asarray(c)
        if c.dtype.kind in "biu":
            cols.append([str(int(v)) for v in c.tolist()])
        else:
            cols.append([fmt(v) for v in c.astype(np.float64).tolist()])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        fh.writelines(",".join(row) + "\n" for row in zip(*cols))


def trajectory_header(n):
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"xh{i + 1}" for i in range(n)]
        + [f"e{i + 1}" for i in range(n)]
        + ["norm_e", "ey", "sqrtV", "env_total", "env_a", "in_omega"]
    )


def uncertainty_along(unc, times, X):
    """Vectorized ``xi(t_k, x_k)`` for every row of ``X``."""
    t = np.asarray(times, dtype=np.float64)[:, None]
    v = (
        unc.const[None, :]
        + unc.amp[None, :] * np.sin(unc.freq[None, :] * t + unc.phase[None, :])
        + np.sin(X) @ unc.S.T
        + np.cos(X) @ unc.Cc.T
        + unc.exp_amp[None, :] * np.exp(-unc.exp_rate[None, :] * t)
    )
    return np.exp(-unc.decay * t) * v


def read_trajectory_csv(path, scenario):
    """Rebuild a Trajectory from a trajectory CSV written by ``simulate``."""
    path = Path(path)
    n = scenario.system.n
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    expected = trajectory_header(n)
    if header[: 1 + 2 * n] != expected[: 1 + 2 * n]:
        raise ConfigError(f"{path}: header does not match a {n}-state trajectory")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two samples")
    t = data[:, 0]
    X = data[:, 1 : 1 + n]
    XH = data[:, 1 + n : 1 + 2 * n]
    e = XH - X
    P = scenario.observer.P
    m = scenario.system.m
    nan = np.full((t.size, m), np.nan)
    return Trajectory(
        times=t,
        x=X,
        xhat=XH,
        omega=nan,
        omega_hat=nan.copy(),
        xi=uncertainty_along(scenario.system.xi, t, X),
        e=e,
        ey=e @ scenario.system.F.T,
        V=np.einsum("ki,ij,kj->k", e, P, e),
        norm_e=np.linalg.norm(e, axis=1),
        dt=float(t[1] - t[0]),
        method="csv",
    )


def _eps_lines(sc):
    lines = [f"eps printed = {sc.eps_printed:.6g}", f"eps* (largest admissible) = {sc.eps_star:.6g}"]
    if sc.eps_star <= 0:
        lines.append("note: the dissipation inequality fails for every eps > 0")
    elif sc.eps_printed > sc.eps_star * (1 + 1e-9):
        lines.append(
            f"note: printed eps exceeds eps* by a factor {sc.eps_printed / sc.eps_star:.3f}; "
            f"envelopes use eps = {sc.eps_used:.6g}"
        )
    else:
        lines.append(f"eps used = {sc.eps_used:.6g}")
    return lines


def _check_eps(sc):
    return sc.eps_used if sc.eps_star > 0 else sc.eps_printed


def verify_lines(sc):
    """Assumption verdicts for a built scenario.  Returns (lines, ok)."""
    s, o = sc.system, sc.observer
    rep = check_assumption3(
        s.A, s.F, s.B, s.C, o.P, o.L, o.K, s.L_f, _check_eps(sc), tol=sc.checks["range_tol"]
    )
    lines = [f"scenario: {sc.name}"]
    lines += _eps_lines(sc)
    lines.append(f"Eq.(7): {'PASS' if rep.ineq_ok else 'FAIL'} (witness {rep.witness_eig:.3f})")
    lines.append(f"Eq.(8): {'PASS' if rep.range_ok else 'FAIL'} (residual {rep.range_residual:.3g})")
    if rep.ineq_ok and sc.eps_printed > sc.eps_used * (1 + 1e-9):
        at_printed = check_assumption3(
            s.A, s.F, s.B, s.C, o.P, o.L, o.K, s.L_f, sc.eps_printed, tol=sc.checks["range_tol"]
        )
        lines.append(
            f"  at the printed eps the dissipation inequality fails (witness {at_printed.witness_eig:.4g})"
        )
    if not rep.ineq_ok:
        lines.append(
            f"  max eigenvalue of the dissipation matrix at eps = {rep.eps:.6g}: {rep.witness_eig:.6g}"
        )
    cert = hinf_certificate(s.A, s.F, o.P, o.L, s.L_f)
    if cert is None:
        lines.append("block condition: no (eps, mu) certificate found")
    else:
        e5, mu = cert
        blk = check_assumption5(s.A, s.F, o.P, o.L, s.L_f, e5, mu)
        lines.append(
            f"block condition: {'PASS' if blk.ok else 'FAIL'} at eps = {e5:.6g}, "
            f"suggested mu = {mu:.6g}"
        )
    return lines, rep.ok


@dataclass
class RunResult:
    name: str
    code: int
    report: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    @property
    def text(self):
        return "\n".join(self.report) + "\n"


def _envelope_columns(rep, tobs):
    header = ["t", "sqrtV", "env_total", "env_a"]
    cols = [rep.times, rep.sqrtV, rep.env_total, rep.env_a]
    if rep.env_c is not None:
        header.append("env_c")
        cols.append(rep.env_c)
    if rep.env_d is not None:
        header.append("env_d")
        cols.append(rep.env_d)
    if tobs is not None:
        header += ["norm_e", "t_observer_bound"]
        cols += [rep.norm_e, tobs.bound]
    return header, cols


def evaluate_scenario(sc, traj):
    """Bound checks for a trajectory.  Returns (report lines, exit code, BoundReport)."""
    ch = sc.checks
    lines = []
    code = EXIT_OK
    if sc.eps_star <= 0:
        lines.append("bounds: not evaluated, Eq.(7) has no admissible eps > 0")
        return lines, EXIT_ASSUMPTION, None
    o = sc.observer
    rep = evaluate_bounds(
        traj,
        o,
        sc.eps_used,
        slack_rel=ch["envelope_rel"],
        slack_abs=ch.get("envelope_abs"),
        k_prime=ch.get("k_prime"),
    )
    lines.append(f"Omega_hi = {rep.omega_hi:.4f}")
    if rep.omega_prime_hi is not None:
        lines.append(f"Omega'_hi = {rep.omega_prime_hi:.4f} (uncertainty component outside Im(P^-1 F^T))")
    lines.append(
        f"envelope dominance: {'PASS' if rep.envelope_ok else 'FAIL'} "
        f"(slack x{1 + rep.slack_rel:g} + {rep.slack_abs:.3g}, worst violation {rep.worst_violation:.3g}, "
        f"raw excess {rep.worst_raw_excess:.3g})"
    )
    if not rep.envelope_ok:
        code = EXIT_BOUND
    g = rep.gronwall
    lines.append(f"Gronwall (alpha = 1/2): {'PASS' if g.passed else 'FAIL'} (max lhs - rhs {g.worst_excess:.3g})")
    if not g.passed:
        code = EXIT_BOUND
    if ch["t_observer"]:
        t = rep.t_observer
        lines.append(
            f"T-observer: {'PASS' if t.passed else 'FAIL'} (mu = {t.mu:.6g}, min margin {np.min(t.margin):.3g}); "
            "sqrt(lambda_min) normalization"
        )
        if not t.passed:
            code = EXIT_BOUND
    radius = ch.get("attractive_radius")
    if radius is not None:
        base = rep.omega_hi if radius == "omega" else float(radius)
        r = base * (1.0 + ch["attractive_margin_rel"]) + ch["attractive_margin_abs"]
        tc = capture_time(traj.norm_e, traj.times, r)
        if radius != "omega":
            lines.append(
                f"configured attractive radius {base:g} (margin x{1 + ch['attractive_margin_rel']:g} "
                f"+ {ch['attractive_margin_abs']:g}); compare with the recomputed Omega bounds above"
            )
        if tc is None or tc >= traj.t_end:
            lines.append(f"attractive set [0, {r:.4f}]: FAIL (not entered for good)")
            code = EXIT_BOUND
        else:
            lines.append(f"attractive set [0, {r:.4f}]: PASS (entered at T* = {tc:.4f})")
    if "ey_after" in ch and "ey_max" in ch:
        mask = traj.times >= ch["ey_after"]
        ey = float(np.max(np.abs(traj.ey[mask]))) if mask.any() else 0.0
        ok = ey <= ch["ey_max"]
        lines.append(
            f"output error |e_y| for t >= {ch['ey_after']:g}: {'PASS' if ok else 'FAIL'} "
            f"(max {ey:.3g}, limit {ch['ey_max']:g})"
        )
        if not ok:
            code = EXIT_BOUND
    final = float(traj.norm_e[-1])
    if "final_error_max" in ch:
        ok = final <= ch["final_error_max"]
        lines.append(
            f"final error ||e({traj.t_end:g})|| = {final:.4g}: {'PASS' if ok else 'FAIL'} "
            f"(threshold {ch['final_error_max']:g})"
        )
        if not ok:
            code = EXIT_BOUND
    else:
        lines.append(f"final error ||e({traj.t_end:g})|| = {final:.4g}")
    return lines, code, rep


def run_scenario(sc, out_dir, write_plot=True):
    """Verify, simulate and check one scenario, writing its artifacts to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(sc.name, EXIT_OK)
    vlines, vok = verify_lines(sc)
    res.report += vlines
    sch = sc.scheme
    res.report.append(f"scheme: {sch.method}, dt = {sch.dt:g}, t_end = {sch.t_end:g}")
    report_path = out / f"{sc.name}_report.txt"
    res.paths["report"] = report_path
    if sc.checks["assumptions"] and not vok:
        res.code = EXIT_ASSUMPTION
        res.report.append("status: assumption check failed, simulation skipped (exit 2)")
        report_path.write_text(res.text, encoding="utf-8")
        return res
    try:
        traj = integrate_coupled(sc.system, sc.observer, sc.x0, sc.xhat0, sch, check_assumptions=False)
    except DivergenceError as exc:
        res.code = EXIT_DIVERGENCE
        res.report.append(f"status: diverged, {exc} (exit 4)")
        report_path.write_text(res.text, encoding="utf-8")
        return res
    blines, code, rep = evaluate_scenario(sc, traj)
    res.report += blines
    if not vok:
        code = EXIT_ASSUMPTION
    res.code = code
    n = sc.system.n
    env_total = rep.env_total if rep is not None else np.full(len(traj), np.nan)
    env_a = rep.env_a if rep is not None else np.full(len(traj), np.nan)
    in_omega = rep.in_omega.astype(np.int8) if rep is not None else np.zeros(len(traj), np.int8)
    sqrtV = np.sqrt(np.maximum(traj.V, 0.0))
    ey = traj.ey[:, 0] if traj.ey.shape[1] == 1 else np.linalg.norm(traj.ey, axis=1)
    cols = (
        [traj.times]
        + [traj.x[:, i] for i in range(n)]
        + [traj.xhat[:, i] for i in range(n)]
        + [traj.e[:, i] for i in range(n)]
        + [traj.norm_e, ey, sqrtV, env_total, env_a, in_omega]
    )
    tpath = out / f"{sc.name}_trajectory.csv"
    write_csv(tpath, trajectory_header(n), cols)
    res.paths["trajectory"] = tpath
    if rep is not None:
        epath = out / f"{sc.name}_envelopes.csv"
        write_csv(epath, *_envelope_columns(rep, rep.t_observer))
        res.paths["envelopes"] = epath
    if write_plot:
        ppath = out / f"plot_{sc.name}.py"
        ppath.write_text(_PLOT_SCRIPT.format(name=sc.name, n=n), encoding="utf-8")
        res.paths["plot"] = ppath
    res.report.append(f"status: exit {res.code}")
    report_path.write_text(res.text, encoding="utf-8")
    return res


_PLOT_SCRIPT = '''"""Plot the {name} run.  Needs matplotlib; run from this directory."""
import csv

import matplotlib.pyplot as plt


def load(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}}


traj = load("{name}_trajectory.csv")
fig, axes = plt.subplots({n} + 1, 1, sharex=True, figsize=(7, 2.2 * ({n} + 1)))
for i in range({n}):
    ax = axes[i]
    ax.plot(traj["t"], traj[f"x{{i + 1}}"], label=f"x{{i + 1}}")
    ax.plot(traj["t"], traj[f"xh{{i + 1}}"], "--", label=f"xh{{i + 1}}")
    ax.legend(loc="upper right")
ax = axes[-1]
ax.plot(traj["t"], traj["norm_e"], label="||e||")
ax.plot(traj["t"], traj["env_a"], ":", label="bound (a)")
ax.set_xlabel("t")
ax.legend(loc="upper right")
fig.tight_layout()
fig.savefig("{name}.png", dpi=120)
'''
