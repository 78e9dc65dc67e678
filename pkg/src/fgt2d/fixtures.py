"""Named source fixtures used by the CLI, the tests and the benchmarks."""
import math

import numpy as np
from scipy.special import erfc

from .quadtree import Domain

BUMP_CENTERS = np.array([[0.20, 0.10], [0.31, 0.50], [0.68, 0.40], [0.41, 0.80], [0.12, 0.45]])
BUMP_WIDTHS = np.array([0.010, 0.005, 0.003, 0.002, 0.001])
BUMP_DOMAIN = Domain((0.5, 0.5), 1.0)
CENTERED = Domain((0.0, 0.0), 1.0)


def sinprod(k):
    """f(x) = sin(2 k pi x1) cos(2 k pi x2)."""
    w = 2.0 * math.pi * k

    def f(x, y):
        return np.sin(w * x) * np.cos(w * y)

    f.__name__ = f"sinprod{k}"
    return f


def constant(c=1.0):
    def f(x, y):
        return np.full(np.broadcast(x, y).shape, float(c))

    return f


def bumps(centers=BUMP_CENTERS, widths=BUMP_WIDTHS):
    """Sum of narrow Gaussians exp(-|x - c_i|^2 / a_i)."""
    centers = np.asarray(centers, dtype=float)
    widths = np.asarray(widths, dtype=float)

    def f(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for (cx, cy), a in zip(centers, widths):
            out += np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / a)
        return out

    return f


def _gauss_gauss_1d(x, c, a, delta, lo, hi):
    """integral_lo^hi exp(-(x-y)^2/delta) exp(-(y-c)^2/a) dy in closed form."""
    tau = a * delta / (a + delta)
    mu = (x * a + c * delta) / (a + delta)
    s = math.sqrt(tau)
    u_hi = (hi - mu) / s
    u_lo = (lo - mu) / s
    # erf(u_hi) - erf(u_lo) without cancellation on either tail
    diff = np.where(u_lo >= 0, erfc(u_lo) - erfc(u_hi),
                    np.where(u_hi <= 0, erfc(-u_hi) - erfc(-u_lo), 2.0 - erfc(u_hi) - erfc(-u_lo)))
    return np.exp(-((x - c) ** 2) / (delta + a)) * 0.5 * math.sqrt(math.pi * tau) * diff


def bumps_transform(points, delta, centers=BUMP_CENTERS, widths=BUMP_WIDTHS, domain=BUMP_DOMAIN):
    """Exact Gauss transform of the bump source restricted to the domain box."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    lo = domain.lower
    hi = lo + domain.side
    out = np.zeros(len(p))
    for (cx, cy), a in zip(np.asarray(centers), np.asarray(widths)):
        out += (_gauss_gauss_1d(p[:, 0], cx, a, delta, lo[0], hi[0]) *
                _gauss_gauss_1d(p[:, 1], cy, a, delta, lo[1], hi[1]))
    return out


def sinprod_periodic_transform(points, delta, k):
    """Periodic transform of sinprod(k) on the unit cell: pi delta exp(-2 pi^2 k^2 delta) f_k."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return math.pi * delta * math.exp(-2.0 * math.pi ** 2 * k * k * delta) * sinprod(k)(p[:, 0], p[:, 1])


def ellipse_segments(m, k=16, a=0.45, b=0.25):
    """Ellipse (a cos t, b sin t) split into m equal-parameter pieces, as Legendre series."""
    from .boundary import BoundarySegment, legendre_fit

    segs = []
    for j in range(m):
        t0, t1 = 2 * math.pi * j / m, 2 * math.pi * (j + 1) / m

        def x1(s, t0=t0, t1=t1):
            return a * np.cos(t0 + (s + 1) * 0.5 * (t1 - t0))

        def x2(s, t0=t0, t1=t1):
            return b * np.sin(t0 + (s + 1) * 0.5 * (t1 - t0))

        segs.append(BoundarySegment(legendre_fit(x1, k), legendre_fit(x2, k)))
    return segs


def ellipse_density(x, y):
    return np.cos(2.0 * x) + np.sin(y)


def random_points(n, rng, domain=BUMP_DOMAIN):
    return domain.lower + domain.side * rng.random((n, 2))
