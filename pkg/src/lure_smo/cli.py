"""Command-line driver.

    lure-smo verify SCENARIO
    lure-smo simulate SCENARIO --out DIR [--dt DT] [--t-end T] [--scheme NAME] [--sigma S]
    lure-smo bounds SCENARIO --traj FILE
    lure-smo run-all --out DIR [--jobs N]
    lure-smo export SCENARIO [--out FILE]

SCENARIO is a builtin name (``example1``, ``example2-xi1``,
``example2-xi2``) or a path to a TOML file.  Exit codes: 0 all checks
pass, 1 usage or parse error, 2 assumption failure, 3 bound violated,
4 divergence.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, DimensionError, ParameterError
from .runner import (
    EXIT_OK,
    EXIT_USAGE,
    evaluate_scenario,
    read_trajectory_csv,
    run_scenario,
    verify_lines,
)
from .scenarios import BUILTINS, load_scenario
from .sim import RESOLVENT, RK4

_SCHEMES = {"rk4": RK4, "resolvent": RESOLVENT, RK4: RK4, RESOLVENT: RESOLVENT}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="lure-smo", description="Sliding-mode observer experiments for set-valued Lur'e systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="check the observer matrix conditions without simulating")
    v.add_argument("scenario")

    s = sub.add_parser("simulate", help="simulate a scenario and write CSV, report and plot script")
    s.add_argument("scenario")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--dt", type=float)
    s.add_argument("--t-end", type=float, dest="t_end")
    s.add_argument("--scheme", choices=sorted(_SCHEMES))
    s.add_argument("--sigma", type=float, help="boundary-layer width for plant and observer")

    b = sub.add_parser("bounds", help="evaluate the envelopes on a saved trajectory CSV")
    b.add_argument("scenario")
    b.add_argument("--traj", required=True, type=Path)

    r = sub.add_parser("run-all", help="simulate every builtin scenario concurrently")
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--jobs", type=int, default=None)

    e = sub.add_parser("export", help="print (or write) a scenario as TOML")
    e.add_argument("scenario")
    e.add_argument("--out", type=Path)
    return p


def _load(name, **overrides):
    cfg = load_scenario(name)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg.build()


def _cmd_verify(args):
    sc = _load(args.scenario)
    lines, ok = verify_lines(sc)
    print("\n".join(lines))
    return EXIT_OK if ok else 2


def _cmd_simulate(args):
    over = {"dt": args.dt, "t_end": args.t_end}
    if args.scheme:
        over["method"] = _SCHEMES[args.scheme]
    if args.sigma is not None:
        over["sigma_plant"] = args.sigma
    over = {k: v for k, v in over.items() if v is not None}
    cfg = load_scenario(args.scenario)
    if over:
        cfg = cfg.with_overrides(**over)
    if args.sigma is not None:
        data = cfg.data
        data["observer"]["sigma_obs"] = float(args.sigma)
        cfg = type(cfg)(data)
    res = run_scenario(cfg.build(), args.out)
    print(res.text, end="")
    for kind, path in res.paths.items():
        print(f"wrote {kind}: {path}")
    return res.code


def _cmd_bounds(args):
    sc = _load(args.scenario)
    traj = read_trajectory_csv(args.traj, sc)
    lines, code, _ = evaluate_scenario(sc, traj)
    print("\n".join(lines))
    return code


def _run_builtin(name, out):
    res = run_scenario(load_scenario(name).build(), Path(out) / name)
    return res.name, res.code, res.text


def _cmd_run_all(args):
    names = sorted(BUILTINS)
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_builtin, n, str(args.out)) for n in names]
        results = [f.result() for f in futures]
    worst = EXIT_OK
    summary = []
    for name, code, text in results:
        summary.append(f"== {name}: exit {code}")
        summary.append(text.rstrip())
        worst = max(worst, code)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    print("\n".join(summary))
    return worst


def _cmd_export(args):
    text = load_scenario(args.scenario).dumps()
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


_COMMANDS = {
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
    "run-all": _cmd_run_all,
    "export": _cmd_export,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DimensionError, ParameterError) as exc:
        print(f"lure-smo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
