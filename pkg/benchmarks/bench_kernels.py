"""Time the numba kernels against their pure-numpy fallbacks and check they agree.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from beziergan import _kernels as k
from beziergan.dataset import superellipse_foil


def adam_case(rng, shape=(512, 256)):
    # each path updates its own copy of the same arrays in place
    init = [rng.normal(size=shape), rng.normal(size=shape), np.zeros(shape), np.zeros(shape)]
    arrays = {}

    def call(f):
        a = arrays.setdefault(f, [x.copy() for x in init])
        f(*a, 2e-4, 0.5, 0.999, 0.5, 0.001, 1e-8)
        return a[0]

    return call


def cases(rng):
    t = np.sort(rng.uniform(size=192))
    curve = superellipse_foil(2.1, 0.09, 0.05)
    X = rng.normal(size=(200, 384))
    Y = rng.normal(size=(200, 384))
    return [
        ("bernstein_basis n=31, 192 pts", lambda f: f(t, 31), k.bernstein_basis_numpy, k.bernstein_basis_numba),
        ("crossing_pairs 192-pt outline", lambda f: f(curve), k.crossing_pairs_numpy, k.crossing_pairs_numba),
        ("pairwise_sqdist 200x200x384", lambda f: f(X, Y), k.pairwise_sqdist_numpy, k.pairwise_sqdist_numba),
        ("adam_update 512x256", adam_case(rng), k.adam_update_numpy, k.adam_update_numba),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if not k.HAVE_NUMBA:
        print("numba not installed; only the numpy path is available")
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, call, f_np, f_nb in cases(rng):
        if f_nb is not None:
            # one call each (the numba one compiles); outputs must agree before timing
            assert np.allclose(call(f_np), call(f_nb), rtol=1e-12, atol=1e-12), name
        t_np = min(timeit.repeat(lambda: call(f_np), number=1, repeat=args.repeat)) * 1e3
        if f_nb is None:
            print(f"{name:32s} {t_np:10.3f} {'-':>10s}")
            continue
        t_nb = min(timeit.repeat(lambda: call(f_nb), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
