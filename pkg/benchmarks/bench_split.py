"""Compare the NumPy and Cython split kernels.

    python benchmarks/bench_split.py [--rows 1000 5000 20000] [--repeat 5]

Times one ``scan_feature`` call per backend on a sorted feature, then a full
boosting fit on the toy data with the tree builder wired to each backend.
"""
import argparse
import time
from unittest import mock

import numpy as np

import arctanboost.tree as tree_mod
from arctanboost import _kernels
from arctanboost.booster import BoosterConfig, fit
from arctanboost.data import make_toy, standardize_targets


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_scan(n, k, repeat):
    rng = np.random.default_rng(0)
    v = np.sort(rng.random(n))
    g = rng.normal(size=(n, k))
    h = rng.uniform(0.1, 1.0, size=(n, k))
    zeros = np.zeros(k)
    args = (v, g, h, zeros, zeros, float(g.sum(0) @ (g.sum(0) / (h.sum(0) + 1))), 1.0, 0.1, 0.0)
    return {name: best_of(lambda f=f: f(*args), repeat) for name, f in _kernels.BACKENDS.items()}


def bench_fit(n, n_estimators, repeat):
    ds = standardize_targets(make_toy(n, 0))
    cfg = BoosterConfig(n_estimators=n_estimators)
    out = {}
    for name, f in _kernels.BACKENDS.items():
        with mock.patch.object(tree_mod, "scan_feature", f):
            out[name] = best_of(lambda: fit(ds, cfg), repeat)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--rows", type=int, nargs="+", default=[1000, 5000, 20000])
    ap.add_argument("--levels", type=int, default=10)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    names = list(_kernels.BACKENDS)
    print(f"backends: {', '.join(names)} (default: {_kernels.BACKEND})")
    if len(names) < 2:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
    print(f"\nscan_feature, {args.levels} outputs, best of {args.repeat}")
    for n in args.rows:
        t = bench_scan(n, args.levels, args.repeat)
        cells = "  ".join(f"{k}={v * 1e3:8.3f} ms" for k, v in t.items())
        speed = f"  speedup x{t['python'] / t['cython']:.1f}" if "cython" in t else ""
        print(f"  n={n:>6}  {cells}{speed}")
    print(f"\nfit, {args.trees} trees, default config, best of {min(args.repeat, 3)}")
    for n in args.rows:
        t = bench_fit(n, args.trees, min(args.repeat, 3))
        cells = "  ".join(f"{k}={v:7.3f} s" for k, v in t.items())
        speed = f"  speedup x{t['python'] / t['cython']:.1f}" if "cython" in t else ""
        print(f"  n={n:>6}  {cells}{speed}")


if __name__ == "__main__":
    main()
