#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure-Python integrator.

Runs each shipped scenario on a shortened horizon with both backends and
prints wall times, speedup, and the worst relative column difference.

    python benchmarks/bench_backends.py [--horizon SECONDS]
"""

import argparse
import dataclasses
import time

import numpy as np

from npreg import engine
from npreg.scenarios import PRESETS


def bench(name: str, horizon: float):
    scen = PRESETS[name]()
    steps_per_sample = max(1, int(round(0.1 / scen.step)))
    scen = dataclasses.replace(scen, horizon=horizon, sample_every=steps_per_sample)

    t0 = time.perf_counter()
    tr_c = engine.simulate(scen, backend="compiled")
    t_compiled = time.perf_counter() - t0

    t0 = time.perf_counter()
    tr_p = engine.simulate(scen, backend="pure")
    t_pure = time.perf_counter() - t0

    worst = 0.0
    for col in tr_c.column_names:
        a, b = tr_c.column(col), tr_p.column(col)
        scale = max(1.0, float(np.max(np.abs(a))))
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return t_compiled, t_pure, worst


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=float, default=2.0,
                        help="simulated seconds per scenario (default 2)")
    args = parser.parse_args()

    if not engine.HAVE_COMPILED:
        raise SystemExit("compiled kernel not built; run pip install -e . first")

    print(f"{'scenario':<12} {'compiled':>10} {'pure':>10} {'speedup':>8} {'max rel diff':>13}")
    for name in PRESETS:
        tc, tp, diff = bench(name, args.horizon)
        print(f"{name:<12} {tc * 1e3:>8.1f}ms {tp * 1e3:>8.1f}ms {tp / tc:>7.0f}x {diff:>13.2e}")


if __name__ == "__main__":
    main()
