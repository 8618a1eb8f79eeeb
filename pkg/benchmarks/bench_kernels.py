"""Time the numba and numpy kernel backends on pipeline-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from orthoerase import _kernels


def cases(rng, n):
    length, d = 76, 64
    vecs = rng.standard_normal((length, n, d))
    v = rng.standard_normal((length, d))
    return vecs, v


def bench(name, fn, repeat):
    fn()  # warm-up, includes JIT compilation
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    return name, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--concepts", type=int, nargs="+", default=[1, 8, 40])
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    names = sorted(_kernels.BACKENDS)
    print(f"backends: {', '.join(names)} (default {_kernels.BACKEND})")
    print(f"{'kernel':<14}{'n':>4}" + "".join(f"{b + ' ms':>14}" for b in names))
    for n in args.concepts:
        vecs, v = cases(rng, n)
        timings = {"mgs": [], "erase_multi": [], "erase_single": []}
        for b in names:
            mgs, multi, single = _kernels.BACKENDS[b]
            Q, W, _, _ = mgs(vecs, 1e-8)
            timings["mgs"].append(bench(b, lambda: mgs(vecs, 1e-8), args.repeat)[1])
            timings["erase_multi"].append(bench(
                b, lambda: multi(v, vecs, Q, W, _kernels.MODE_ADAPTIVE, 2.0, 100.0, 0.93, 1e-12), args.repeat)[1])
            timings["erase_single"].append(bench(
                b, lambda: single(v, vecs[:, 0], _kernels.MODE_ADAPTIVE, 2.0, 100.0, 0.93, 1e-12), args.repeat)[1])
        for kernel, ts in timings.items():
            print(f"{kernel:<14}{n:>4}" + "".join(f"{t * 1e3:>14.4f}" for t in ts))


if __name__ == "__main__":
    main()
