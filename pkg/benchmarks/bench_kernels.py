"""Compiled vs numpy kernels, and a full solve under each backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 500] [--paths 1024 --steps 2000]

Both backends get one warm-up call first, so numba compilation (or the load
from its on-disk cache) is excluded from the timings.
"""
import argparse
import os
import time

import numpy as np

from pppcontract import hjb, kernels, model, simulate


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def thomas_case(n, rng):
    sub, sup = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    diag = -(sub + sup + 0.1)
    rhs = rng.normal(size=n)
    return (sub, diag, sup, rhs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=500, help="solver grid size N")
    ap.add_argument("--paths", type=int, default=1024)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    params = model.ModelParams()
    bundle = model.example_bundle()
    res = hjb.solve(params, bundle, args.n)
    grid = res.grid

    cfg = hjb.HowardConfig()
    table = hjb.ControlTable.build(params, bundle, cfg)
    fwd, bwd, sec = hjb._differences(res.value, grid)
    scan_args = (grid.interior, fwd, bwd, sec, -params.delta * res.value.values[1:-1], params.delta,
                 table.g, table.d, table.f, table.effort)

    tab = simulate._tables(res.policy, grid, params, bundle)
    credit = np.array([0.0, res.v0, grid.x_bar, 0.0])
    normals = rng.standard_normal((args.paths, args.steps))
    dt = 1e-3

    def paths(fn):
        m = args.paths
        state = np.full(m, 2.5)
        bufs = [np.ones(m), np.zeros(m), np.zeros(m), np.zeros(m), np.zeros(m), np.zeros(m, dtype=np.int64)]
        fn(state, *bufs, normals, 0, args.steps, tab.inv_dx, tab.g, tab.vol, tab.cons, tab.pub, tab.phi,
           params.delta, dt, np.sqrt(dt), np.exp(-params.delta * dt), grid.x_bar, True, credit)

    tri = thomas_case(args.n - 1, rng)
    cases = [
        (f"thomas (n={args.n - 1})", lambda: kernels.thomas_nb(*tri), lambda: kernels.thomas_np(*tri)),
        (f"improve scan ({args.n - 1} nodes x {cfg.rent_grid}x{cfg.effort_grid})",
         lambda: kernels.improve_scan_nb(*scan_args), lambda: kernels.improve_scan_np(*scan_args)),
        (f"advance paths ({args.paths} x {args.steps})",
         lambda: paths(kernels.advance_paths_nb), lambda: paths(kernels.advance_paths_np)),
    ]

    print(f"{'kernel':<48s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speed-up':>9s}")
    for name, fast, slow in cases:
        tn = best_of(fast, args.repeat)
        tp = best_of(slow, max(1, args.repeat // 2))
        print(f"{name:<48s} {tn:11.5f} {tp:11.5f} {tp / tn:8.1f}x")

    def full_solve():
        hjb.solve(params, bundle, args.n)

    flag = "PPPCONTRACT_DISABLE_NUMBA"
    old = os.environ.get(flag)
    try:
        os.environ[flag] = "0"
        tn = best_of(full_solve, 2)
        os.environ[flag] = "1"
        tp = best_of(full_solve, 1)
    finally:
        if old is None:
            os.environ.pop(flag, None)
        else:
            os.environ[flag] = old
    print(f"{f'full solve (N={args.n})':<48s} {tn:11.5f} {tp:11.5f} {tp / tn:8.1f}x")


if __name__ == "__main__":
    main()
