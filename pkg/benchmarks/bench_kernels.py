"""Time the numba and numpy smoother kernels, and a full V-cycle solve on each path.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

The solve comparison runs the fallback in a subprocess with
BLOCKMG_DISABLE_NUMBA=1, since the flag is read at import.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np
import scipy.sparse as sp

from blockmg import kernels
from blockmg.apps import FemSpec, fem_matrix_1d, fem_matrix_2d

CASES = {
    "q2-1d-t14": lambda: fem_matrix_1d(FemSpec(2, 14), cut=False),
    "q2-2d-t7": lambda: fem_matrix_2d(FemSpec(2, 7, 2)),
    "q3-2d-t6": lambda: fem_matrix_2d(FemSpec(3, 6, 2)),
}

SOLVE_SNIPPET = """
import time, blockmg as bm
op = bm.fem_matrix_2d(bm.FemSpec(2, 7, 2))
_, b = bm.make_rhs_sine(op)
h = bm.build_hierarchy(op, bm.projector_symbol_pz(2, 3), bm.gauss_seidel_config(), "v")
bm.solve(h, b, max_iter=1)
t0 = time.perf_counter()
rep = bm.solve(h, b)
print(rep.iterations, time.perf_counter() - t0)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(repeat):
    rows = []
    for name, make in CASES.items():
        A = make().matrix
        lower = sp.tril(A, format="csr")
        diag = A.diagonal()
        rng = np.random.default_rng(0)
        x0, b = rng.standard_normal(A.shape[0]), rng.standard_normal(A.shape[0])
        # warm the jit
        kernels._gs_forward_numba(A.indptr, A.indices, A.data, x0.copy(), b, 1)
        kernels._jacobi_numba(A.indptr, A.indices, A.data, diag, x0.copy(), b, 0.7, 1)
        res = {
            "gs_numba": best_of(lambda: kernels._gs_forward_numba(A.indptr, A.indices, A.data, x0.copy(), b, 1), repeat),
            "gs_numpy": best_of(lambda: kernels._gs_forward_numpy(A, x0.copy(), b, 1, lower), repeat),
            "jacobi_numba": best_of(lambda: kernels._jacobi_numba(A.indptr, A.indices, A.data, diag, x0.copy(), b, 0.7, 1), repeat),
            "jacobi_numpy": best_of(lambda: kernels._jacobi_numpy(A, diag, x0.copy(), b, 0.7, 1), repeat),
        }
        rows.append({"case": name, "N": A.shape[0], "nnz": A.nnz, **res})
    return rows


def bench_solve():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, BLOCKMG_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, capture_output=True, text=True, check=True)
        its, secs = res.stdout.split()
        out[label] = {"iterations": int(its), "seconds": float(secs)}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if not kernels.USE_NUMBA:
        sys.exit("numba path disabled; unset BLOCKMG_DISABLE_NUMBA to benchmark both")
    rows = bench_kernels(args.repeat)
    print(f"{'case':<12}{'N':>9}{'nnz':>10}{'GS numba':>11}{'GS numpy':>11}{'speedup':>9}{'Jac numba':>11}{'Jac numpy':>11}")
    for r in rows:
        print(
            f"{r['case']:<12}{r['N']:>9}{r['nnz']:>10}"
            f"{r['gs_numba'] * 1e3:>9.2f}ms{r['gs_numpy'] * 1e3:>9.2f}ms{r['gs_numpy'] / r['gs_numba']:>8.1f}x"
            f"{r['jacobi_numba'] * 1e3:>9.2f}ms{r['jacobi_numpy'] * 1e3:>9.2f}ms"
        )
    solve = bench_solve()
    print("Q2 2D t=7 V-cycle solve (z=3): " + ", ".join(f"{k} {v['iterations']} its in {v['seconds']:.2f}s" for k, v in solve.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "solve": solve}, fh, indent=1)


if __name__ == "__main__":
    main()
