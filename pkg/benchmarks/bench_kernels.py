"""Compare the numba-compiled kernels with the interpreted fallback.

Each case runs in a fresh interpreter so the ``LURE_SMO_DISABLE_JIT`` flag
takes effect at import.  Compilation is excluded: the compiled path is
warmed up on a short horizon before timing.

    python benchmarks/bench_kernels.py [--t-end 0.2] [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, sys, time
import numpy as np
from lure_smo.scenarios import load_scenario
from lure_smo.sim import SchemeConfig, integrate_coupled
from lure_smo.linalg import jacobi_eigh

name, method, t_end, repeats = sys.argv[1], sys.argv[2], float(sys.argv[3]), int(sys.argv[4])
sc = load_scenario(name).build()

def sim(t):
    sch = SchemeConfig(method, sc.scheme.dt, t)
    return integrate_coupled(sc.system, sc.observer, sc.x0, sc.xhat0, sch, check_assumptions=False)

sim(10 * sc.scheme.dt)
best = float("inf")
for _ in range(repeats):
    t0 = time.perf_counter()
    tr = sim(t_end)
    best = min(best, time.perf_counter() - t0)

S = np.random.default_rng(0).standard_normal((6, 6))
S = S + S.T
jacobi_eigh(S, 1e-14)
t0 = time.perf_counter()
for _ in range(200):
    jacobi_eigh(S, 1e-14)
eig = (time.perf_counter() - t0) / 200
print(json.dumps({"sim": best, "steps": len(tr.times) - 1, "eig": eig, "final": float(tr.norm_e[-1])}))
"""


def _run(name, method, t_end, repeats, disable):
    env = dict(os.environ)
    env.pop("LURE_SMO_DISABLE_JIT", None)
    if disable:
        env["LURE_SMO_DISABLE_JIT"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", _CHILD, name, method, str(t_end), str(repeats)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="example1")
    ap.add_argument("--t-end", type=float, default=0.2)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    from lure_smo.sim import RESOLVENT, RK4

    print(f"scenario {args.scenario}, horizon {args.t_end} s, best of {args.repeats}")
    print(f"{'scheme':<32}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}{'|d final|':>12}")
    for method in (RK4, RESOLVENT):
        fast = _run(args.scenario, method, args.t_end, args.repeats, False)
        slow = _run(args.scenario, method, args.t_end, args.repeats, True)
        print(
            f"{method:<32}{fast['sim']:>12.4f}{slow['sim']:>12.4f}"
            f"{slow['sim'] / fast['sim']:>10.1f}{abs(fast['final'] - slow['final']):>12.1e}"
        )
    print(
        f"{'jacobi_eigh 6x6 (per call)':<32}{fast['eig']:>12.2e}{slow['eig']:>12.2e}"
        f"{slow['eig'] / fast['eig']:>10.1f}"
    )


if __name__ == "__main__":
    main()
