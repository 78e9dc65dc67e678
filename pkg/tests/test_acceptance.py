"""Acceptance criteria 1-10, each at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from fgt2d import boundary as B
from fgt2d import fixtures as F
from fgt2d import heat
from fgt2d import hermite as H
from fgt2d import periodic as P
from fgt2d.cli import delta_suite, ellipse_problem, fit_cost_model, scaling_suite
from fgt2d.engine import FGT, discrete_transform, volume_transform
from fgt2d.kernels import hermite_rows
from fgt2d.oracle import direct_boundary, direct_dgt, direct_periodic
from fgt2d.quadtree import refine_adaptive

ACCEPTANCE_RESULTS = {}


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_RESULTS[n] = line
    print(line)
    return ok


# ------------------------------------------------------------------ 1 ----

def criterion_1():
    rng = np.random.default_rng(1)
    worst = 0.0
    t0 = time.perf_counter()
    for delta in (1e-6, 1e-4, 1e-2, 1.0):
        src, tgt = rng.random((2000, 2)), rng.random((2000, 2))
        q = rng.uniform(-1, 1, 2000)
        ref = direct_dgt(src, q, tgt, delta)
        for eps in (1e-3, 1e-6, 1e-9):
            got = discrete_transform(src, q, tgt, delta, eps).point_values
            worst = max(worst, np.abs(got - ref).max() / (eps * np.abs(q).sum()))
    secs = time.perf_counter() - t0
    return record(1, worst <= 10 and secs < 60,
                  f"discrete: max err = {worst:.2e} eps*sum|q| (limit 10), {secs:.1f} s (limit 60)")


# ------------------------------------------------------------------ 2 ----

def criterion_2():
    t0 = time.perf_counter()
    rows = delta_suite(ntargets=200, seed=2)
    secs = time.perf_counter() - t0
    worst = max(r["max_error"] / r["eps"] for r in rows)
    return record(2, worst <= 10 and secs < 600 and len(rows) == 21,
                  f"bumps, {len(rows)} cells: max err = {worst:.2e} eps (limit 10), {secs:.1f} s (limit 600)")


# ------------------------------------------------------------------ 3 ----

def criterion_3():
    worst = 0.0
    # the closed-form eigenvalue against brute-force image sums, once
    pts = np.random.default_rng(3).random((4, 2))
    check = np.abs(direct_periodic(F.sinprod(2), pts, 1e-2) - F.sinprod_periodic_transform(pts, 1e-2, 2)).max()
    for K in (1, 2, 4):
        tree = refine_adaptive(F.sinprod(K), 1e-10, k=8, max_levels=9, periodic=True)
        grid = tree.grid_points().reshape(-1, 2)
        for delta in (1e-4, 1e-2, 1e-1):
            exact = F.sinprod_periodic_transform(grid, delta, K)
            for eps in (1e-6, 1e-9):
                got = volume_transform(tree, delta, eps).grid_values.reshape(-1)
                worst = max(worst, np.abs(got - exact).max() / eps)
    return record(3, worst <= 10 and check < 1e-12,
                  f"periodic eigenfunction: max err = {worst:.2e} eps (limit 10); eigenvalue check {check:.1e}")


# ------------------------------------------------------------------ 4 ----

def criterion_4():
    rng = np.random.default_rng(4)
    segs, dens = ellipse_problem(32, 16)
    th = rng.uniform(0, 2 * math.pi, 100)
    inside = rng.uniform(-1, 1, (400, 2))
    inside = inside[(inside[:, 0] / 0.45) ** 2 + (inside[:, 1] / 0.25) ** 2 < 1][:50]
    outside = rng.uniform(-0.5, 0.5, (50, 2))
    targets = np.r_[inside, outside, np.c_[0.45 * np.cos(th), 0.25 * np.sin(th)]]
    s = np.linspace(-1, 1, 65)
    sig_inf = max(np.abs(dens.values(j, s)).max() for j in range(len(segs)))
    gamma = sum(sg.length for sg in segs)
    worst, flags_ok = 0.0, True
    for delta in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0):
        ref = direct_boundary(segs, dens.coeffs, targets, delta)
        for eps in (1e-3, 1e-6, 1e-9):
            res = B.run_boundary(segs, dens, delta, eps, targets)
            worst = max(worst, np.abs(res.values - ref).max() / (10 * eps * sig_inf * gamma))
            expect = np.array([sg.length > B.resolution_threshold(eps, sg.order) * math.sqrt(delta) for sg in segs])
            flags_ok &= bool(np.array_equal(res.flagged, expect))
            flags_ok &= (res.stats["corrected_pairs"] > 0) == bool(expect.any())
    return record(4, worst <= 1 and flags_ok,
                  f"ellipse single layer: max err = {worst:.2e} of the 10 eps |sigma| |Gamma| bound; "
                  f"corrections only below threshold: {flags_ok}")


# ------------------------------------------------------------------ 5 ----

def criterion_5():
    from numpy.polynomial import legendre as leg

    rng = np.random.default_rng(5)
    segs = F.ellipse_segments(32, 16)
    worst = 0.0
    for kind in ("single", "double"):
        for delta in (1e-6, 1e-5, 1e-4):
            for j in (0, 5, 11, 20):
                seg = segs[j]
                c = B.legendre_fit(lambda s: F.ellipse_density(*seg.point(s).T), 16)
                s = rng.uniform(-1, 1, 20)
                t = seg.point(s) + seg.normal(s) * rng.uniform(-3, 3, (20, 1)) * math.sqrt(delta)
                t[:5] = seg.point(s[:5])
                rule = B.discretize_boundary([seg], B.BoundaryDensity([c], kind))
                raw = np.array([B._kernel(ti, rule.points, rule.normals, delta, kind) @ (
                    leg.legval(rule.nodes, c) * rule.jac_weights) for ti in t])
                got = raw + B.correct_near_targets(seg, c, t, delta, 1e-15, kind, kc=20)
                ref = direct_boundary([seg], [c], t, delta, kind)
                worst = max(worst, np.abs(got - ref).max() / max(1.0, np.abs(ref).max()))
    return record(5, worst <= 1e-13, f"k_c = 20 corrections vs oracle: max err = {worst:.1e} (limit 1e-13)")


# ------------------------------------------------------------------ 6 ----

def criterion_6():
    rows = scaling_suite((1e-3, 1e-6, 1e-9), levels=(4, 5, 6, 7), repeats=3)
    ratios, fits = [], []
    for eps in (1e-3, 1e-6, 1e-9):
        sub = [r for r in rows if r["eps"] == eps]
        pps = [r["points_per_second_excl_precompute"] for r in sub]
        ratios.append(max(pps) / min(pps))
        fits.append(fit_cost_model([r["N"] for r in sub], [r["total_seconds"] for r in sub]))
    ok = max(ratios) < 2 and all(A > 0 and B >= 0 for A, B, _ in fits)
    return record(6, ok, "throughput ratio per eps " + ", ".join(f"{x:.2f}" for x in ratios) +
                  " (limit 2); A, B = " + "; ".join(f"{A:.1e}, {B:.1e}" for A, B, _ in fits))


# ------------------------------------------------------------------ 7 ----

def criterion_7():
    rng = np.random.default_rng(7)
    sd = 1.0
    e = H.form_hermite_from_points(rng.uniform(-0.5, 0.5, (5, 2)), rng.standard_normal(5), [0, 0], sd, 12)
    loc = H.LocalExpansion([0, 0], sd, rng.standard_normal((12, 12)))
    exact_id = (np.array_equal(H.h2h_shift(e, e.center).coeffs, e.coeffs) and
                np.array_equal(H.l2l_shift(loc, loc.center).coeffs, loc.coeffs))
    comp = max(np.abs(H.h2h_shift(H.h2h_shift(e, [0.3, -0.2]), [0.1, 0.4]).coeffs -
                      H.h2h_shift(e, [0.1, 0.4]).coeffs).max(),
               np.abs(H.l2l_shift(H.l2l_shift(loc, [0.2, 0.1]), [-0.1, 0.3]).coeffs -
                      H.l2l_shift(loc, [-0.1, 0.3]).coeffs).max() / np.abs(loc.coeffs).max())
    worst = 0.0
    orders = {}
    count = 0
    for eps in (1e-3, 1e-6, 1e-9):
        rc = H.cutoff_radius(eps)
        done = 0
        while done < 100:
            r = float(rng.choice([0.25, 0.5, 1.0, 2.0, 3.0]))
            offs = H.kept_offsets(r, rc)
            if not offs:
                continue
            a, b = offs[rng.integers(len(offs))]
            off = np.array([a, b]) * rng.choice([-1, 1], 2)
            if rng.random() < 0.5:
                off = off[::-1]
            p = orders.setdefault((r, eps), H.sharp_order(r, eps))
            n = int(rng.integers(1, 8))
            q = rng.uniform(-1, 1, n)
            q /= np.abs(q).sum()
            src = H.form_hermite_from_points(rng.uniform(-0.5, 0.5, (n, 2)) * r, q, [0, 0], sd, p)
            c = off * r
            nodes, step = H.planewave_nodes(r, eps)
            pw = H.planewave_to_local(H.planewave_translate(H.hermite_to_planewave(src, nodes, step), c), p)
            ref = H.h2l_translate(src, c, p)
            t = c + rng.uniform(-0.5, 0.5, (20, 2)) * r
            worst = max(worst, np.abs(H.eval_local(pw, t) - H.eval_local(ref, t)).max() / eps)
            done += 1
            count += 1
    ok = exact_id and comp <= 1e-12 and worst <= 10
    return record(7, ok, f"zero shift exact: {exact_id}; composition {comp:.1e} (limit 1e-12); "
                         f"plane wave vs Hermite on {count} geometries: {worst:.2e} eps (limit 10)")


# ------------------------------------------------------------------ 8 ----

def criterion_8():
    parity = True
    worst = 0.0
    for delta in (0.1, 0.5, 1.0):
        for L in (P.lattice_sums(delta, 12), P.lattice_sums_poisson(delta, 12)):
            parity &= not L[1::2, :].any() and not L[:, 1::2].any()
        sd = math.sqrt(delta)
        L = P.lattice_sums(delta, 4)
        J = 15
        ref = np.zeros((4, 4))
        for a in range(-J, J + 1):
            ha = hermite_rows(np.array([a / sd]), 4)[0]
            for b in range(-J, J + 1):
                if max(abs(a), abs(b)) >= 2:
                    ref += np.outer(ha, hermite_rows(np.array([b / sd]), 4)[0])
        for g in ((0, 0), (2, 2)):
            worst = max(worst, abs(L[g] - ref[g]) / max(1.0, abs(ref[g])))
    return record(8, parity and worst <= 1e-12, f"parity zeros exact: {parity}; (0,0), (2,2) vs direct "
                                                f"lattice sums: {worst:.1e} (limit 1e-12)")


# ------------------------------------------------------------------ 9 ----

def criterion_9():
    tree, c = heat.initial_tree(0)
    eps = 1e-9
    devs = [abs(heat.periodic_mean(tree, t, eps) - c.mean()) for t in (1e-4, 1e-3, 1e-2)]
    pf = heat.plan_orders(1e-4, eps, True)
    pl = heat.plan_orders(1e-4, eps, False)
    larger = all(pf[l] > pl[l] for l in pl if l in pf) and len(pl) > 0
    return record(9, max(devs) <= 1e-8 and larger,
                  "mean deviation " + ", ".join(f"{d:.1e}" for d in devs) +
                  f" (limit 1e-8); orders at t=1e-4 prefactor {pf} vs plain {pl}")


# ----------------------------------------------------------------- 10 ----

def criterion_10():
    rng = np.random.default_rng(10)
    bad = 0
    discarded = 0
    for i in range(50):
        n = int(rng.integers(5, 90))
        pts = rng.random((n, 2)) ** rng.uniform(1, 3)
        periodic = i % 3 == 0
        tree = refine_adaptive(None, 1.0, k=1, max_levels=6, points=pts, q=int(rng.integers(1, 6)),
                               periodic=periodic)
        delta = 10 ** rng.uniform(-5, 0)
        rep = FGT(tree, delta, float(rng.choice([1e-3, 1e-6, 1e-9]))).audit_coverage()
        bad += not rep["ok"]
        discarded += rep["by_mechanism"].get("discarded", 0)
    return record(10, bad == 0, f"pair coverage on 50 trees: {bad} failures, {discarded} pairs discarded by cutoff")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(crit):
    assert crit()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
