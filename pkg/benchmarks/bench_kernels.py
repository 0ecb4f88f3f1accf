"""Compare the compiled gate kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--events N] [--repeat R]``.
Also times a full ``simulate_gates`` call with each backend, since the
kernels are only one stage of the Monte Carlo.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from sagnacfwm.counting import _kernels_py

try:
    from sagnacfwm.counting import _kernels as _compiled
except ImportError:
    _compiled = None

SIM = """
from sagnacfwm.counting import simulate_gates, Routing, BACKEND
from sagnacfwm.scenario import resolve_scenario
import time
c = resolve_scenario('operating_point').experiment.matched()
t = time.perf_counter()
simulate_gates(c.pump, c.det1, c.det2, c.scatter, Routing.CD, {gates}, 1)
print(BACKEND, time.perf_counter() - t)
"""


def events(n, seed=0):
    rng = np.random.default_rng(seed)
    a = np.cumsum(rng.geometric(0.02, n)).astype(np.int64)
    b = np.cumsum(rng.geometric(0.02, n)).astype(np.int64)
    return a, b


def bench(mod, a, b, repeat):
    t_dead = min(timeit.repeat(lambda: mod.deadtime_filter(a, 12, 0), number=1, repeat=repeat))
    t_coinc = min(timeit.repeat(lambda: mod.count_coincidences(a, b), number=1, repeat=repeat))
    return t_dead, t_coinc


def simulate(pure, gates):
    env = dict(os.environ)
    env.pop("SAGNACFWM_PURE_PYTHON", None)
    if pure:
        env["SAGNACFWM_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", SIM.format(gates=gates)], env=env, capture_output=True, text=True, check=True)
    name, seconds = out.stdout.split()
    return name, float(seconds)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=1_000_000, help="candidate clicks per detector")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--gates", type=int, default=100_000_000, help="gates for the end-to-end timing")
    args = ap.parse_args()

    a, b = events(args.events)
    rows = [("python", *bench(_kernels_py, a, b, args.repeat))]
    if _compiled is not None:
        rows.append(("cython", *bench(_compiled, a, b, args.repeat)))
        assert np.array_equal(_compiled.deadtime_filter(a, 12, 0)[0], _kernels_py.deadtime_filter(a, 12, 0)[0])
    else:
        print("compiled extension not available; showing the fallback only")

    print(f"{args.events:,} candidate clicks per detector")
    print(f"{'backend':8s} {'deadtime_filter':>16s} {'count_coinc':>12s}")
    for name, td, tc in rows:
        print(f"{name:8s} {td * 1e3:13.2f} ms {tc * 1e3:9.2f} ms")
    if len(rows) == 2:
        print(f"speed-up: dead time x{rows[0][1] / rows[1][1]:.0f}, coincidences x{rows[0][2] / rows[1][2]:.0f}")

    print(f"\nsimulate_gates, {args.gates:.0e} gates at the packaged operating point")
    for pure in (False, True):
        name, sec = simulate(pure, args.gates)
        print(f"{name:8s} {sec:8.3f} s")


if __name__ == "__main__":
    main()
