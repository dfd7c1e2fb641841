#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the numpy fallback.

Times the three hot kernels on simulation-shaped workloads, then a full
end-to-end mission with each backend (selected via MURALSIM_PURE in a
subprocess, since the choice is made at import time).

Run:  python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from muralsim._kernels import _fallback

try:
    from muralsim._kernels import _speedups
except ImportError:
    _speedups = None

REPEAT = 5


def best_of(fn, *args, repeat=REPEAT, inner=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_splat(mod):
    grid = np.zeros((400, 400))
    def run():
        for k in range(1000):  # ~10 drawing seconds of two-drone deposits
            mod.splat_gaussian(grid, 0.3 + (k % 300) * 0.004, 1.0 + (k % 7) * 0.01,
                               0.0085, 0.0085, 0.08, 0.005)
    return best_of(run)


def bench_consensus(mod):
    rng = np.random.default_rng(0)
    xy = np.ascontiguousarray(rng.normal(0, 2, size=(181, 2)))
    pairs = np.ascontiguousarray(rng.integers(0, 181, size=(200, 2)).astype(np.int64))
    def run():
        for _ in range(100):  # ten seconds of 10 Hz scans
            mod.ransac_consensus(xy, pairs, 0.03)
    return best_of(run)


def bench_projection(mod):
    rng = np.random.default_rng(1)
    pts = np.ascontiguousarray(np.cumsum(rng.normal(0, 0.05, size=(400, 2)), axis=0))
    def run():
        for k in range(3000):  # a minute of 50 Hz control projections
            mod.project_polyline(pts, 1.0, 2.0, 0, 399)
    return best_of(run)


def bench_end_to_end(pure: bool) -> float:
    """Wall seconds for the two-drone fixture mission in a subprocess."""
    env = dict(os.environ)
    if pure:
        env["MURALSIM_PURE"] = "1"
    else:
        env.pop("MURALSIM_PURE", None)
    code = (
        "import time\n"
        "from muralsim.compiler import CompileParams, compile_svg\n"
        "from muralsim.sim import Scenario, run_scenario\n"
        "from muralsim import _kernels\n"
        "svg = open('fixtures/demo_mural.svg').read()\n"
        "plan = compile_svg(svg, CompileParams())\n"
        "sc = Scenario.default(drones=2)\n"
        "sc.duration_s = 170.0\n"
        "t0 = time.perf_counter()\n"
        "rep = run_scenario(sc, plan)\n"
        "wall = time.perf_counter() - t0\n"
        "print(f\"{_kernels.BACKEND} {wall:.3f} {rep.metrics['sim_seconds']:.2f}\")\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                         capture_output=True, text=True,
                         cwd=Path(__file__).resolve().parent.parent)
    backend, wall, sim_s = out.stdout.split()
    print(f"  end-to-end ({backend}): {float(wall):.2f} s wall for {sim_s} sim-s "
          f"({float(sim_s) / float(wall):.1f}x realtime)")
    return float(wall)


def main() -> None:
    backends = [("python", _fallback)]
    if _speedups is not None:
        backends.insert(0, ("cython", _speedups))
    else:
        print("compiled extension not available; benchmarking fallback only")

    results = {}
    for bench_name, bench in (("splat_gaussian x1000", bench_splat),
                              ("ransac_consensus x100", bench_consensus),
                              ("project_polyline x3000", bench_projection)):
        for backend_name, mod in backends:
            results[(bench_name, backend_name)] = bench(mod)

    print(f"{'kernel workload':<26} " + "".join(f"{n:>12}" for n, _ in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for bench_name, _ in (("splat_gaussian x1000", None),
                          ("ransac_consensus x100", None),
                          ("project_polyline x3000", None)):
        row = f"{bench_name:<26} "
        times = [results[(bench_name, n)] for n, _ in backends]
        row += "".join(f"{t * 1000:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)

    print("\nfull mission (subprocess per backend):")
    wall_fast = bench_end_to_end(pure=False)
    wall_pure = bench_end_to_end(pure=True)
    if _speedups is not None:
        print(f"  mission speedup: {wall_pure / wall_fast:.2f}x")


if __name__ == "__main__":
    main()
