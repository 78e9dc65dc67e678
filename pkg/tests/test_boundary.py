import math

import numpy as np
import pytest
from numpy.polynomial import legendre as leg

from fgt2d import boundary as B
from fgt2d import fixtures as F
from fgt2d.oracle import curve_integral, direct_boundary


def straight(x0=0.1, x1=0.7, y=0.3, k=8):
    a = np.zeros(k)
    b = np.zeros(k)
    a[0], a[1] = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
    b[0] = y
    return B.BoundarySegment(a, b)


def ellipse(m=32, k=16, kind="single"):
    segs = F.ellipse_segments(m, k)
    coeffs = [B.legendre_fit(lambda s, g=g: F.ellipse_density(*g.point(s).T), k) for g in segs]
    return segs, B.BoundaryDensity(coeffs, kind)


def test_segment_geometry():
    seg = straight()
    assert seg.length == pytest.approx(0.6, rel=1e-14)
    assert np.allclose(seg.center, [0.4, 0.3])
    assert np.allclose(seg.normal(np.array([0.0])), [[0.0, -1.0]])
    segs = F.ellipse_segments(8)
    # outward normals on a counter-clockwise ellipse
    assert (np.einsum("ij,ij->i", segs[0].normal(np.linspace(-1, 1, 5)), segs[0].point(np.linspace(-1, 1, 5))) > 0).all()


def test_straight_segment_charges():
    seg = straight()
    dens = B.BoundaryDensity([np.r_[2.0, np.zeros(7)]])
    rule = B.discretize_boundary([seg], dens)
    s, w = leg.leggauss(8)
    assert np.allclose(rule.strengths, 2.0 * w * 0.3, rtol=1e-14)
    assert np.allclose(rule.points[:, 0], 0.4 + 0.3 * s)


def test_total_charge_matches_arclength_integral():
    segs, dens = ellipse()
    rule = B.discretize_boundary(segs, dens)
    assert rule.strengths.sum() == pytest.approx(curve_integral(segs, dens.coeffs), abs=1e-12)


def test_zero_density_gives_zero(rng):
    segs, _ = ellipse(16)
    dens = B.BoundaryDensity([np.zeros(16)] * 16)
    res = B.run_boundary(segs, dens, 1e-4, 1e-6, rng.uniform(-0.5, 0.5, (20, 2)))
    assert not res.values.any()


def test_degenerate_segment_rejected():
    seg = B.BoundarySegment(np.r_[0.3, np.zeros(7)], np.r_[0.3, np.zeros(7)])
    with pytest.raises(B.DegenerateSegment):
        B.discretize_boundary([seg], B.BoundaryDensity([np.ones(8)]))


def test_mismatched_orders_rejected():
    with pytest.raises(ValueError):
        B.discretize_boundary([straight(k=8)], B.BoundaryDensity([np.ones(6)]))
    with pytest.raises(ValueError):
        B.BoundaryDensity([np.ones(4)], kind="triple")


def test_double_layer_dipoles_along_normal():
    segs, dens = ellipse(8, 16, "double")
    rule = B.discretize_boundary(segs, dens)
    assert not rule.strengths.any()
    cross = rule.dipoles[:, 0] * rule.normals[:, 1] - rule.dipoles[:, 1] * rule.normals[:, 0]
    assert np.abs(cross).max() < 1e-15


# -------------------------------------------------------- classification ----

def test_resolution_constant_example():
    c = B.resolution_constant(2e-16)
    assert c == pytest.approx(12.03, abs=1e-2)
    assert math.exp(-c * c / 4) == pytest.approx(2e-16, rel=1e-12)


def test_classification_limits():
    seg = straight()
    assert B.classify_segment(seg, 1e6, 1e-9) == "resolved"
    assert B.classify_segment(seg, 1e-12, 1e-9) == "needs_correction"


def test_gauss_legendre_limit_is_tight():
    k, eps = 16, 1e-9
    c = B.gauss_legendre_limit(eps, k)
    s, w = leg.leggauss(k)
    u = np.linspace(-1, 1, 401)
    from scipy.special import erf

    def err(cc):
        a = 0.5 * cc
        approx = np.exp(-(a * (s[None, :] - u[:, None])) ** 2) @ w
        exact = 0.5 * math.sqrt(math.pi) / a * (erf(a * (1 - u)) + erf(a * (1 + u)))
        return 0.5 * np.abs(approx - exact).max()

    assert err(0.98 * c) <= 1.5 * eps
    assert err(1.05 * c) > eps


# ------------------------------------------------------------ correction ----

def test_far_target_has_zero_correction():
    seg = straight()
    out = B.correct_near_targets(seg, np.r_[1.0, np.zeros(7)], [[0.4, 0.9]], 1e-5, 1e-9)
    assert out[0] == 0


def test_on_curve_straight_segment_is_line_integral():
    seg = straight()
    delta, sigma = 1e-6, 1.3
    dens = np.r_[sigma, np.zeros(7)]
    t = np.array([[0.35, 0.3], [0.5, 0.3]])
    rule = B.discretize_boundary([seg], B.BoundaryDensity([dens]))
    raw = np.array([np.exp(-((ti - rule.points) ** 2).sum(1) / delta) @ rule.strengths for ti in t])
    val = raw + B.correct_near_targets(seg, dens, t, delta, 1e-15)
    assert np.allclose(val, sigma * math.sqrt(math.pi * delta), rtol=1e-10)


@pytest.mark.parametrize("kind", ["single", "double"])
def test_correction_matches_oracle(kind, rng):
    segs = F.ellipse_segments(32, 16)
    for delta in (1e-6, 1e-4):
        for j in (0, 11):
            seg = segs[j]
            c = B.legendre_fit(lambda s: F.ellipse_density(*seg.point(s).T), 16)
            s = rng.uniform(-1, 1, 12)
            t = seg.point(s) + seg.normal(s) * rng.uniform(-3, 3, (12, 1)) * math.sqrt(delta)
            rule = B.discretize_boundary([seg], B.BoundaryDensity([c], kind))
            raw = np.array([B._kernel(ti, rule.points, rule.normals, delta, kind) @ (
                leg.legval(rule.nodes, c) * rule.jac_weights) for ti in t])
            got = raw + B.correct_near_targets(seg, c, t, delta, 1e-15, kind)
            ref = direct_boundary([seg], [c], t, delta, kind)
            scale = max(1.0, np.abs(ref).max())
            assert np.abs(got - ref).max() <= 1e-13 * scale


def test_disk_intervals_of_straight_segment():
    seg = straight()
    iv = B.disk_intervals(seg, np.array([0.4, 0.3]), 0.15)
    assert len(iv) == 1
    assert iv[0][0] == pytest.approx(-0.5, abs=1e-11) and iv[0][1] == pytest.approx(0.5, abs=1e-11)
    assert B.disk_intervals(seg, np.array([0.4, 0.9]), 0.1) == []


def test_correction_locality(rng):
    segs, dens = ellipse()
    delta, eps = 1e-6, 1e-9
    t = np.r_[rng.uniform(-0.5, 0.5, (200, 2)), segs[3].point(np.linspace(-1, 1, 5))]
    on = B.run_boundary(segs, dens, delta, eps, t)
    off = B.run_boundary(segs, dens, delta, eps, t, corrections=False)
    changed = np.flatnonzero(on.values != off.values)
    radius = math.sqrt(delta * math.log(1 / eps))
    centers = np.array([s.center for s in segs])
    lengths = np.array([s.length for s in segs])
    for i in changed:
        d = np.linalg.norm(centers - t[i], axis=1)
        assert (on.flagged & (d <= radius + lengths)).any()
    assert len(changed) >= 5


# -------------------------------------------------------------- transform ----

@pytest.mark.parametrize("delta", [1.0, 1e-3, 1e-5])
def test_ellipse_single_layer_vs_oracle(delta, rng):
    segs, dens = ellipse()
    eps = 1e-9
    th = rng.uniform(0, 2 * math.pi, 50)
    t = np.r_[rng.uniform(-0.5, 0.5, (50, 2)), np.c_[0.45 * np.cos(th), 0.25 * np.sin(th)]]
    res = B.run_boundary(segs, dens, delta, eps, t)
    ref = direct_boundary(segs, dens.coeffs, t, delta)
    bound = 10 * eps * max(np.abs(c).sum() for c in dens.coeffs) * sum(s.length for s in segs)
    assert np.abs(res.values - ref).max() <= bound
    if delta == 1.0:
        assert res.stats["flagged_segments"] == 0


def test_double_layer_constant_density_sanity(rng):
    segs = F.ellipse_segments(32, 16)
    dens = B.BoundaryDensity([np.r_[1.0, np.zeros(15)] for _ in segs], "double")
    delta = 1e-6
    ext = np.array([[0.48, 0.0], [0.0, 0.3], [-0.47, 0.05]])
    inner = np.array([[0.0, 0.0], [0.1, 0.1]])
    res = B.run_boundary(segs, dens, delta, 1e-9, np.r_[ext, inner])
    assert np.abs(res.values[:3]).max() < 1e-6
    assert np.isfinite(res.values[3:]).all()


def test_spectral_convergence_in_resolved_regime(rng):
    t = rng.uniform(-0.3, 0.3, (10, 2))
    delta = 0.05
    ref = None
    errs = []
    for m in (4, 8, 16):
        segs = F.ellipse_segments(m, 8)
        coeffs = [B.legendre_fit(lambda s, g=g: F.ellipse_density(*g.point(s).T), 8) for g in segs]
        rule = B.discretize_boundary(segs, B.BoundaryDensity(coeffs))
        from fgt2d.oracle import direct_dgt

        vals = direct_dgt(rule.points, rule.strengths, t, delta)
        if ref is None:
            fine = F.ellipse_segments(64, 16)
            fc = [B.legendre_fit(lambda s, g=g: F.ellipse_density(*g.point(s).T), 16) for g in fine]
            ref = direct_boundary(fine, fc, t, delta)
        errs.append(np.abs(vals - ref).max())
    assert errs[1] < errs[0] / 100 and errs[2] < max(errs[1] / 100, 1e-13)
