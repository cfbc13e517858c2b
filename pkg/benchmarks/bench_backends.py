"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the hot kernels (stencil derivatives, gauge-field assembly, rotation
updates) and a full gauge minimization on both implementations, asserts
they agree to near machine precision, and prints a timing table.

    python3 benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from gaugelab._kernels import _impl, py_backend as py
from gaugelab.gauge import GaugeOptions, minimize
from gaugelab.grid import Grid
from gaugelab.lie import random_skew_potential


def _timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _agree(a, b, label, tol=1e-12):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(a))))
    worst = float(np.max(np.abs(a - b))) / scale
    assert worst <= tol, f"{label}: backends disagree by {worst:.3e}"
    return worst


def bench_kernels(N, n, repeat, rows):
    rng = np.random.default_rng(2024)
    grid = Grid(N)
    F = rng.standard_normal((N, N))
    Om = random_skew_potential(n, grid, 1.0, 2, seed=5)
    P = np.tile(np.eye(n), (N, N, 1, 1))
    Z = Om.data[:, :, :, :, 0] * 0.1

    cases = [
        (f"diff N={N}", lambda m: m.diff(F, 0, grid.h)),
        (f"gauge_fields N={N} n={n}", lambda m: m.gauge_fields(P, Om.data, grid.h)[0]),
        (f"so_exp N={N} n={n}", lambda m: m.so_exp(Z, 0.7)),
        (f"rot_update N={N} n={n}", lambda m: m.rot_update(P, Z, 0.7)),
    ]
    for label, call in cases:
        out_py = call(py)
        t_py = _timeit(lambda: call(py), repeat)
        if _impl is None:
            rows.append((label, t_py, float("nan"), float("nan")))
            continue
        out_c = call(_impl)
        _agree(out_py, out_c, label)
        t_c = _timeit(lambda: call(_impl), repeat)
        rows.append((label, t_py, t_c, t_py / t_c))


def bench_minimize(N, n, rows):
    import importlib
    import os

    import gaugelab._kernels as K

    grid = Grid(N)
    Om = random_skew_potential(n, grid, 0.5, 2, seed=11)
    opts = GaugeOptions(max_iterations=40, grad_tol=1e-300)
    results = {}
    times = {}
    for want in ("python", "compiled"):
        if want == "compiled" and _impl is None:
            continue
        os.environ["GAUGELAB_BACKEND"] = want
        importlib.reload(K)
        t0 = time.perf_counter()
        res = minimize(Om, opts)
        times[want] = time.perf_counter() - t0
        results[want] = res.energy
    os.environ.pop("GAUGELAB_BACKEND", None)
    importlib.reload(K)
    if "compiled" in results:
        diff = abs(results["python"] - results["compiled"])
        assert diff <= 1e-10 * (1.0 + abs(results["python"])), \
            f"minimize energies differ: {results}"
        rows.append((f"minimize 40 iters N={N} n={n}", times["python"],
                     times["compiled"], times["python"] / times["compiled"]))
    else:
        rows.append((f"minimize 40 iters N={N} n={n}", times["python"],
                     float("nan"), float("nan")))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"compiled extension available: {_impl is not None}")
    rows = []
    for N, n in ((64, 2), (64, 3), (128, 3)):
        bench_kernels(N, n, args.repeat, rows)
    for N, n in ((64, 3), (128, 3)):
        bench_minimize(N, n, rows)

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for label, t_py, t_c, ratio in rows:
        comp = f"{t_c * 1e3:9.3f}ms" if t_c == t_c else "       n/a"
        rat = f"{ratio:7.2f}x" if ratio == ratio else "     n/a"
        print(f"{label:<{width}}  {t_py * 1e3:9.3f}ms  {comp}  {rat}")


if __name__ == "__main__":
    main()
