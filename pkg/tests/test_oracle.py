import math

import numpy as np
import pytest
from scipy.special import erf

from fgt2d import fixtures as F
from fgt2d import oracle as O
from fgt2d.boundary import BoundarySegment, legendre_fit
from fgt2d.quadtree import Domain, refine_adaptive


def test_direct_dgt_simple_cases():
    assert O.direct_dgt([[0.3, 0.4]], [2.5], [[0.3, 0.4]], 0.1)[0] == pytest.approx(2.5)
    d, delta = 0.2, 0.05
    v = O.direct_dgt([[0.5 - d, 0.5], [0.5 + d, 0.5]], [1.5, 1.5], [[0.5, 0.5]], delta)[0]
    assert v == pytest.approx(2 * 1.5 * math.exp(-d * d / delta), rel=1e-15)


def test_direct_dgt_two_orderings(rng):
    y, x = rng.random((100, 2)), rng.random((100, 2))
    q = rng.standard_normal(100)
    a = O.direct_dgt(y, q, x, 0.01, chunk=7)
    b = O.direct_dgt_by_source(y, q, x, 0.01)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-14 * np.abs(q).sum())


def test_direct_dgt_dipole_finite_difference(rng):
    y, x = rng.random((5, 2)), rng.random((7, 2))
    d = rng.standard_normal((5, 2))
    h = 1e-6
    fd = (O.direct_dgt(y + h * d, np.ones(5), x, 0.1) - O.direct_dgt(y - h * d, np.ones(5), x, 0.1)) / (2 * h)
    assert np.allclose(O.direct_dgt(y, np.zeros(5), x, 0.1, dipoles=d), fd, atol=1e-7)


def test_direct_volume_gaussian_mass():
    v = O.direct_volume(F.constant(1.0), [[0.5, 0.5]], 1e-4, F.BUMP_DOMAIN)[0]
    assert v == pytest.approx(math.pi * 1e-4, rel=1e-11)
    assert O.direct_volume(F.constant(0.0), [[0.2, 0.7]], 1e-2, F.BUMP_DOMAIN)[0] == 0


def test_bumps_closed_form_vs_quadrature(rng):
    pts = rng.random((10, 2))
    for delta in (1e-4, 1e-2):
        quadv = O.direct_volume(F.bumps(), pts, delta, F.BUMP_DOMAIN)
        closed = F.bumps_transform(pts, delta)
        assert np.abs(quadv - closed).max() <= 1e-11 * max(1.0, np.abs(closed).max())


def test_tree_route_matches_callable_route(rng):
    tree = refine_adaptive(F.sinprod(1), 1e-12, k=8, max_levels=6)
    pts = rng.random((5, 2))
    a = O.direct_volume(None, pts, 1e-2, tree.domain, tree=tree)
    b = O.direct_volume(F.sinprod(1), pts, 1e-2, tree.domain)
    assert np.abs(a - b).max() < 1e-11


def test_volume_oracle_self_convergence(rng):
    pts = rng.random((5, 2))
    a = O.direct_volume(F.bumps(), pts, 1e-3, F.BUMP_DOMAIN, nodes=20)
    b = O.direct_volume(F.bumps(), pts, 1e-3, F.BUMP_DOMAIN, nodes=40)
    assert np.abs(a - b).max() < 1e-12


def test_direct_periodic_narrow_kernel_is_free_space():
    pts = np.array([[0.5, 0.5], [0.4, 0.6]])
    a = O.direct_periodic(F.bumps(), pts, 1e-4)
    b = O.direct_volume(F.bumps(), pts, 1e-4, F.BUMP_DOMAIN)
    assert np.allclose(a, b, atol=1e-15)


def test_direct_periodic_eigenfunction(rng):
    pts = rng.random((5, 2))
    got = O.direct_periodic(F.sinprod(1), pts, 0.05)
    assert np.abs(got - F.sinprod_periodic_transform(pts, 0.05, 1)).max() < 1e-12


# -------------------------------------------------------------- boundary ----

def _straight(length=0.6, k=8):
    y = np.zeros(k)
    y[0] = 0.3
    return BoundarySegment(legendre_fit(lambda s: 0.1 + 0.5 * length * (s + 1), k), y)


def test_boundary_zero_density():
    seg = _straight()
    assert not O.direct_boundary([seg], [np.zeros(8)], [[0.3, 0.3], [0.5, 0.31]], 1e-3).any()


@pytest.mark.parametrize("delta", [1e-5, 1e-3, 1e-1])
def test_boundary_straight_segment_erf(delta):
    seg = _straight()
    sigma = 1.7
    dens = np.zeros(8)
    dens[0] = sigma
    t = np.array([[0.25, 0.3], [0.4, 0.31], [0.69, 0.28], [0.8, 0.3]])
    got = O.direct_boundary([seg], [dens], t, delta)
    sd = math.sqrt(delta)
    ref = sigma * np.exp(-(t[:, 1] - 0.3) ** 2 / delta) * 0.5 * math.sqrt(math.pi) * sd * (
        erf((0.7 - t[:, 0]) / sd) - erf((0.1 - t[:, 0]) / sd))
    assert np.abs(got - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("kind", ["single", "double"])
def test_boundary_oracle_self_convergence(kind, rng):
    segs = F.ellipse_segments(16, 16)
    coeffs = [legendre_fit(lambda s, g=g: F.ellipse_density(*g.point(s).T), 16) for g in segs]
    th = rng.uniform(0, 2 * math.pi, 6)
    t = np.r_[rng.uniform(-0.4, 0.4, (6, 2)), np.c_[0.45 * np.cos(th), 0.25 * np.sin(th)]]
    for delta in (1e-5, 1e-3):
        a = O.direct_boundary(segs, coeffs, t, delta, kind, nodes=20)
        b = O.direct_boundary(segs, coeffs, t, delta, kind, nodes=40)
        scale = max(1.0, np.abs(b).max())
        assert np.abs(a - b).max() <= 1e-12 * scale


def test_curve_integral_is_perimeter_for_unit_density():
    a, b = 0.45, 0.25
    segs = F.ellipse_segments(32, 16, a, b)
    one = [np.r_[1.0, np.zeros(15)] for _ in segs]
    from scipy.special import ellipe

    perim = 4 * a * ellipe(1 - (b / a) ** 2)
    assert O.curve_integral(segs, one) == pytest.approx(perim, rel=1e-12)


def test_adaptive_terminates_on_cancelling_integrand():
    x, w = np.polynomial.legendre.leggauss(20)
    val = O._adaptive(lambda s: np.sin(40 * s) * 1e3, -1.0, 1.0, 1e-30, x, w)
    assert abs(val) < 1e-10
