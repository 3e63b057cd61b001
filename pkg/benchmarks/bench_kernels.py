"""Compare the numba kernels against the pure-numpy fallback.

Runs each hot kernel on the same inputs through both implementations and
prints calls/sec and the speedup.  The numba path is warmed up first so JIT
compile time is not counted.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cbsa import kernels
from cbsa.completion import GridMap
from cbsa.generate import random_polygon


def _timeit(fn, reps):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return max(1e-9, time.perf_counter() - t0) / reps


def _cases(args):
    import random

    rng = random.Random(args.seed)
    polys = [random_polygon(rng, (rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)), rng.uniform(0.15, 0.35))
             for _ in range(args.obstacles)]
    edges, offsets = kernels.pack_polygons(polys)
    gen = np.random.default_rng(args.seed)
    xs = gen.uniform(-2, 2, args.points)
    ys = gen.uniform(-2, 2, args.points)
    grid = GridMap.from_polygons(polys, (-2.0, -2.0, 2.0, 2.0), 0.05, 0.05)
    occ = grid.occupancy
    free = np.argwhere(~occ)
    si, sj = free[0]
    gi, gj = free[-1]
    fov = np.deg2rad(5.0)

    return {
        "sense": lambda impl: impl.sense(0.1, -0.2, 0.3, edges, 8, fov, 0.4),
        "signed_distance_many": lambda impl: impl.signed_distance_many(xs, ys, edges, offsets),
        "segment_clear": lambda impl: impl.segment_clear(-1.9, -1.9, 1.9, 1.9, edges),
        "astar": lambda impl: impl.astar(occ, int(si), int(sj), int(gi), int(gj)),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description="numba vs numpy kernel throughput")
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--obstacles", type=int, default=6)
    ap.add_argument("--points", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'kernel':<22}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, call in _cases(args).items():
        t_nb = _timeit(lambda: call(kernels.numba_impl), args.reps)
        t_np = _timeit(lambda: call(kernels.numpy_impl), max(1, args.reps // 4))
        print(f"{name:<22}{t_nb:>12.2e}{t_np:>12.2e}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
