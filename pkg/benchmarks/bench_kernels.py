"""Compare the compiled min-plus kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--nx 256] [--iters 2000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from matherkit import _fallback, kernels, model
from matherkit.grids import PhaseGrid, build_kernel


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(nx=256, iters=2000, rows=256, repeat=3):
    grid = PhaseGrid(nx=nx)
    k = build_kernel(model.pendulum(), grid, 1.0)
    u0 = np.zeros(nx)
    table = np.random.default_rng(0).normal(size=(rows, nx))
    impls = {"python": _fallback}
    if kernels._core is not None:
        impls["compiled"] = kernels._core
    results = {}
    for name, impl in impls.items():
        lo = _best_of(lambda: kernels.lax_oleinik(k.band, k.offsets, u0, iters, keep=nx, impl=impl),
                      repeat)
        mp = _best_of(lambda: kernels.minplus_band(table, k.band, k.offsets, impl=impl), repeat)
        results[name] = (lo, mp)
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=256)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--rows", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    res = run(a.nx, a.iters, a.rows, a.repeat)
    print(f"nx={a.nx} lax_oleinik iters={a.iters} minplus rows={a.rows} threads={kernels.thread_count()}")
    print(f"{'backend':<10}{'lax_oleinik [s]':>18}{'minplus_band [s]':>18}")
    for name, (lo, mp) in res.items():
        print(f"{name:<10}{lo:>18.4f}{mp:>18.4f}")
    if "compiled" in res:
        (plo, pmp), (clo, cmp_) = res["python"], res["compiled"]
        print(f"{'speedup':<10}{plo / clo:>17.1f}x{pmp / cmp_:>17.1f}x")


if __name__ == "__main__":
    main()
