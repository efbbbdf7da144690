"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat 200]

Each kernel runs once first so numba compilation is not counted.
"""

import argparse
import timeit

import numpy as np

from noisyfb import kernels


def cases(rng):
    old = rng.random(4096)
    table = rng.dirichlet(np.ones(4), size=64)
    rowidx = rng.integers(0, 64, size=4096)

    p3 = rng.random((16, 4, 64))
    p3 /= p3.sum()
    p2 = p3.reshape(64, 64)

    cells = 4096
    pflat = rng.random(cells)
    pflat /= pflat.sum()
    ia, ib, ic = rng.integers(0, 8, cells), rng.integers(0, 2, cells), rng.integers(0, 16, cells)

    theta = rng.random(42)
    idx = rng.integers(0, 42, size=(3, cells))

    payload = rng.integers(0, 2, size=(10000, 9), dtype=np.uint8)
    uniforms = rng.random(2 * 20000)

    return {
        "extend": (old, table, rowidx),
        "cmi3": (p3,),
        "cond_entropy2": (p2,),
        "grouped_cmi": (pflat, ia, ib, ic, 8, 2, 16),
        "weighted_product": (pflat, theta, idx),
        "bcec": (payload, uniforms, 0.2, 0.1, 10**6, True),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    a = ap.parse_args()
    if not kernels.NUMBA_KERNELS:
        print("numba unavailable (or disabled); timing numpy only")
    args = cases(np.random.default_rng(0))
    print(f"{'kernel':18s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s}")
    for name, arg in args.items():
        row = []
        for fam in (kernels.NUMPY_KERNELS, kernels.NUMBA_KERNELS):
            fn = fam.get(name)
            if fn is None:
                row.append(float("nan"))
                continue
            fn(*arg)
            row.append(timeit.timeit(lambda: fn(*arg), number=a.repeat) / a.repeat * 1e6)
        print(f"{name:18s} {row[0]:10.1f} {row[1]:10.1f} {row[0] / row[1]:8.1f}")


if __name__ == "__main__":
    main()
