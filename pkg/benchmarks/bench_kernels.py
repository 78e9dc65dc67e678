"""Compare the numba kernels with their pure-numpy fallbacks.

Times each hot kernel on the same inputs through both paths, checks that the
results agree, and finishes with an end-to-end discrete transform.  The numpy
path can also be forced globally with FGT2D_DISABLE_NUMBA=1.

    python benchmarks/bench_kernels.py [--n 20000] [--repeats 3]
"""
import argparse
import math
import time

import numpy as np

from fgt2d import _accel, kernels
from fgt2d.engine import FGT, discrete_transform
from fgt2d.quadtree import refine_adaptive


def best_of(fn, repeats):
    fn()  # compile / warm caches
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    q = rng.uniform(-1, 1, n)
    dip = np.zeros((n, 2))
    tree = refine_adaptive(None, 1.0, k=1, max_levels=12, points=x, q=32)
    delta = 1e-3
    fgt = FGT(tree, delta, 1e-6)
    sd = math.sqrt(delta)
    src = _points(tree, x, q, dip)
    leaves = tree.leaves
    near = fgt.lists.near
    p = max(fgt.plan.hermite_order.values())
    centers = tree.centers[leaves]
    A = rng.standard_normal((len(leaves), p, p)) * 1e-3
    shift = np.zeros((len(near), 2))

    def p2p(use):
        out = np.zeros(n)
        kernels.p2p(src.x, src.off, src.x, src.q, src.dip, src.off, tree.leaf_of[near.tgt],
                    tree.leaf_of[near.src], shift, delta, out, use_numba=use)
        return out

    def p2h(use):
        return kernels.p2h(src.x, src.q, src.dip, src.off, centers, sd, p, use_numba=use)

    def l2p(use):
        out = np.zeros(n)
        kernels.l2p(src.x, src.off, A, centers, sd, out, use_numba=use)
        return out

    return {"p2p": p2p, "p2h": p2h, "l2p": l2p}


def _points(tree, x, q, dip):
    from fgt2d.engine import _Points

    return _Points(tree, x, q, dip)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not importable; only the numpy path exists")
        return
    print(f"{'kernel':10s} {'numba_s':>10s} {'numpy_s':>10s} {'speedup':>8s} {'max_rel_diff':>13s}")
    for name, fn in kernel_cases(args.n).items():
        a, b = fn(True), fn(False)
        diff = float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
        tn = best_of(lambda: fn(True), args.repeats)
        tp = best_of(lambda: fn(False), args.repeats)
        print(f"{name:10s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {diff:13.2e}")
    rng = np.random.default_rng(1)
    x = rng.random((args.n, 2))
    q = rng.uniform(-1, 1, args.n)
    for use in (True, False):
        t = best_of(lambda: discrete_transform(x, q, x, 1e-3, 1e-6, use_numba=use), 1)
        print(f"discrete transform N={args.n} {'numba' if use else 'numpy'}: {t:.3f} s")


if __name__ == "__main__":
    main()
