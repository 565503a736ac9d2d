"""Compare the compiled and pure-Python cell kernels on synthetic surfaces.

    python benchmarks/bench_kernels.py [--repeats 3]

Each case is cut with both kernels; the script checks the results are
bitwise equal and prints the best-of-N wall time and the speed-up.
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import meshes  # noqa: E402
from cutcell import Tolerances, background_grid, cut_mesh  # noqa: E402
from cutcell import kernels  # noqa: E402
from cutcell.global_cut import process_cells_py  # noqa: E402

CASES = [
    ("cube n=28", meshes.cube, 28),
    ("icosphere(2) n=20", lambda: meshes.icosphere(2, bumps=0.1), 20),
    ("torus n=20", meshes.torus, 20),
    ("stair n=18", meshes.stair, 18),
]


def best_time(fn, repeats):
    best, out = float("inf"), None
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)
    if kernels.compiled_process_cells is None:
        print("compiled kernel not built; run `python setup.py build_ext --inplace`")
        return 1
    print(f"{'case':22s} {'cut cells':>9s} {'python [s]':>11s} {'compiled [s]':>13s} {'speed-up':>9s}  equal")
    for name, make, n in CASES:
        m = make()
        tol = Tolerances.from_mesh(m)
        g = background_grid(*m.bbox, n_max=n, n_min=min(n, 10))
        tp, a = best_time(lambda: cut_mesh(g, m, tol, impl=process_cells_py), args.repeats)
        tc, b = best_time(lambda: cut_mesh(g, m, tol, impl=kernels.compiled_process_cells), args.repeats)
        same = (a.V_in == b.V_in and a.V_out == b.V_out and a.area == b.area
                and np.array_equal(a.states, b.states))
        print(f"{name:22s} {a.n_cut:9d} {tp:11.3f} {tc:13.3f} {tp / tc:8.1f}x  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
