"""Compiled vs numpy kernels on the curve sizes the library actually produces.

Run with ``python benchmarks/bench_kernels.py``. Prints one line per case with
the median wall time of each backend and the speedup.
"""
import argparse
import statistics
import time

import numpy as np

from reeblab import _kernels_py as py_k

try:
    from reeblab import _kernels as cy_k
except ImportError:  # extension not built
    cy_k = None


def hopf_pair(n, eps=None, seed=0):
    """Two linked circles in R^3 (or a circle and a nearby pushoff if ``eps``)."""
    t = np.linspace(0, 2 * np.pi, n + 1)
    P = np.stack([np.cos(t), np.sin(t), 0 * t], 1)
    if eps is None:
        Q = np.stack([1 + np.cos(t), 0 * t, np.sin(t)], 1)
    else:
        Q = np.stack([(1 + eps * np.cos(t)) * np.cos(t), (1 + eps * np.cos(t)) * np.sin(t), eps * np.sin(t)], 1)
    R = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))[0]
    return P @ R.T, Q @ R.T


def timeit(fn, *args, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = [
        ("crossing_sum", "orbit pair n=1000", hopf_pair(1000)),
        ("crossing_sum", "loop vs orbit n=200000/1000", (hopf_pair(200000)[0], hopf_pair(1000)[1])),
        ("crossing_sum", "pushoff n=125000 eps=1e-3", hopf_pair(125000, eps=1e-3)),
        ("gauss_sum", "orbit pair n=1000", hopf_pair(1000)),
        ("gauss_sum", "orbit pair n=3000", hopf_pair(3000)),
    ]
    print(f"{'kernel':<14}{'case':<32}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, label, (P, Q) in cases:
        tp, rp = timeit(getattr(py_k, name), P, Q, repeat=args.repeat)
        if cy_k is None:
            print(f"{name:<14}{label:<32}{tp:>12.4f}{'n/a':>12}{'':>10}")
            continue
        tc, rc = timeit(getattr(cy_k, name), P, Q, repeat=args.repeat)
        same = rp == rc if name == "crossing_sum" else abs(rp - rc) < 1e-9
        print(f"{name:<14}{label:<32}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x" + ("" if same else "  MISMATCH"))


if __name__ == "__main__":
    main()
