"""Brute-force reference evaluators.

Nothing here touches the fast-path modules' kernels or quadrature: kernels are
evaluated inline, panel rules come straight from numpy's Gauss-Legendre nodes,
and leaf polynomials are evaluated by barycentric interpolation.
"""
import math

import numpy as np
from numpy.polynomial.legendre import leggauss, legval, legder

WINDOW = 8.0


def direct_dgt(sources, strengths, targets, delta, dipoles=None, chunk=2048):
    """O(NM) Gaussian sum, blocked over targets."""
    y = np.atleast_2d(np.asarray(sources, dtype=float))
    q = np.asarray(strengths, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.zeros(len(x))
    for s in range(0, len(x), chunk):
        dx = x[s:s + chunk, None, 0] - y[None, :, 0]
        dy = x[s:s + chunk, None, 1] - y[None, :, 1]
        g = np.exp(-(dx * dx + dy * dy) / delta)
        w = q[None, :]
        if dipoles is not None:
            d = np.atleast_2d(dipoles)
            w = w + (2.0 / delta) * (dx * d[None, :, 0] + dy * d[None, :, 1])
        out[s:s + chunk] = (g * w).sum(axis=1)
    return out


def direct_dgt_by_source(sources, strengths, targets, delta):
    """Same sum accumulated source by source (an independent ordering)."""
    y = np.atleast_2d(np.asarray(sources, dtype=float))
    x = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.zeros(len(x))
    for j in range(len(y)):
        r2 = ((x - y[j]) ** 2).sum(axis=1)
        out += strengths[j] * np.exp(-r2 / delta)
    return out


# ---------------------------------------------------------------- volume ----

def _panels(a, b, width, n):
    """Composite Gauss-Legendre nodes/weights on [a, b] with panels no wider than ``width``."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    m = max(1, int(math.ceil((b - a) / width - 1e-12)))
    x, w = leggauss(n)
    e = a + (b - a) * np.arange(m + 1) / m
    mid, rad = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
    return (mid[:, None] + rad[:, None] * x).ravel(), (rad[:, None] * w).ravel()


def _bary_weights(k):
    i = np.arange(k)
    th = (2 * i + 1) * np.pi / (2 * k)
    nodes = -np.cos(th)
    w = (-1.0) ** i * np.sin(th)
    # nodes ascending means theta ascending; sign pattern is shared, fine for ratios
    return nodes, w


def _bary_matrix(k, x):
    nodes, w = _bary_weights(k)
    d = x[:, None] - nodes[None, :]
    exact = np.isclose(d, 0.0, atol=1e-15)
    d = np.where(exact, 1.0, d)
    r = w[None, :] / d
    M = r / r.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    M[hit] = exact[hit].astype(float)
    return M


def direct_volume(f, targets, delta, domain, tree=None, nodes=20, periodic=False):
    """Volume Gauss transform by panel quadrature.

    ``f`` is a vectorized callable on the domain, or None with ``tree`` given,
    in which case the leaf sample grids are interpolated leaf by leaf.
    """
    x = np.atleast_2d(np.asarray(targets, dtype=float))
    sd = math.sqrt(delta)
    lo = np.asarray(domain.lower, dtype=float)
    L = domain.side
    W = WINDOW * sd
    out = np.zeros(len(x))
    images = [(0, 0)]
    if periodic:
        J = int(math.ceil(W / L)) + 1
        images = [(a, b) for a in range(-J, J + 1) for b in range(-J, J + 1)]
    if tree is None:
        for i, t in enumerate(x):
            acc = 0.0
            for a, b in images:
                o = np.array([a, b]) * L
                x0 = max(lo[0] + o[0], t[0] - W), min(lo[0] + L + o[0], t[0] + W)
                y0 = max(lo[1] + o[1], t[1] - W), min(lo[1] + L + o[1], t[1] + W)
                if x0[1] <= x0[0] or y0[1] <= y0[0]:
                    continue
                width = min(sd, L) / 2
                u, wu = _panels(x0[0], x0[1], width, nodes)
                v, wv = _panels(y0[0], y0[1], width, nodes)
                gu = np.exp(-((t[0] - u) ** 2) / delta) * wu
                gv = np.exp(-((t[1] - v) ** 2) / delta) * wv
                F = f(u[:, None] - o[0], v[None, :] - o[1])
                acc += gu @ F @ gv
            out[i] = acc
        return out
    k = tree.k
    cen = tree.centers[tree.leaves]
    half = 0.5 * tree.side_of(tree.level[tree.leaves])
    for i, t in enumerate(x):
        acc = 0.0
        for a, b in images:
            o = np.array([a, b]) * L
            c = cen + o
            near = (np.abs(c[:, 0] - t[0]) < half + W) & (np.abs(c[:, 1] - t[1]) < half + W)
            for j in np.flatnonzero(near):
                h = half[j]
                x0 = max(c[j, 0] - h, t[0] - W), min(c[j, 0] + h, t[0] + W)
                y0 = max(c[j, 1] - h, t[1] - W), min(c[j, 1] + h, t[1] + W)
                width = min(sd, 2 * h) / 2
                u, wu = _panels(x0[0], x0[1], width, nodes)
                v, wv = _panels(y0[0], y0[1], width, nodes)
                if len(u) == 0 or len(v) == 0:
                    continue
                Mu = _bary_matrix(k, (u - c[j, 0]) / h)
                Mv = _bary_matrix(k, (v - c[j, 1]) / h)
                F = Mu @ tree.values[j] @ Mv.T
                gu = np.exp(-((t[0] - u) ** 2) / delta) * wu
                gv = np.exp(-((t[1] - v) ** 2) / delta) * wv
                acc += gu @ F @ gv
        out[i] = acc
    return out


def direct_periodic_points(sources, strengths, targets, delta, eps=1e-16):
    """Image sum of point sources over |j_i| <= ceil(r_c sqrt(delta)) + 1."""
    rc = math.sqrt(math.log(1.0 / eps))
    J = int(math.ceil(rc * math.sqrt(delta))) + 1
    out = np.zeros(len(np.atleast_2d(targets)))
    y = np.atleast_2d(sources)
    for a in range(-J, J + 1):
        for b in range(-J, J + 1):
            out += direct_dgt(y + np.array([a, b]), strengths, targets, delta)
    return out


def direct_periodic(f, targets, delta, eps=1e-16, nodes=20):
    """Periodic volume transform of a callable on the unit cell [0, 1]^2."""
    from .quadtree import Domain

    return direct_volume(f, targets, delta, Domain((0.5, 0.5), 1.0), nodes=nodes, periodic=True)


# -------------------------------------------------------------- boundary ----

def _curve(seg, s):
    x = legval(s, seg.x1)
    y = legval(s, seg.x2)
    dx = legval(s, legder(seg.x1))
    dy = legval(s, legder(seg.x2))
    return x, y, dx, dy


def _seg_integrand(seg, dens, t, delta, kind):
    if t is None:
        return lambda tt: _seg_integrand(seg, dens, tt, delta, kind)

    def g(s):
        x, y, dx, dy = _curve(seg, s)
        sp = np.hypot(dx, dy)
        rx, ry = t[0] - x, t[1] - y
        k = np.exp(-(rx * rx + ry * ry) / delta)
        if kind == "double":
            # outward normal for a counter-clockwise curve
            nx, ny = dy / sp, -dx / sp
            k = k * (2.0 / delta) * (rx * nx + ry * ny)
        return k * legval(s, dens) * sp

    return g


def _adaptive(g, a, b, tol, x, w, depth=0, floor=None):
    mid, rad = 0.5 * (a + b), 0.5 * (b - a)
    gw = g(mid + rad * x)
    whole = rad * (w @ gw)
    if floor is None:
        # differences below roundoff of the whole integral are not resolvable
        floor = 1e-16 * rad * (w @ np.abs(gw))
    m = 0.5 * (a + b)
    lm, lr = 0.5 * (a + m), 0.5 * (m - a)
    rm, rr = 0.5 * (m + b), 0.5 * (b - m)
    left, right = lr * (w @ g(lm + lr * x)), rr * (w @ g(rm + rr * x))
    if abs(left + right - whole) <= max(tol, floor) or depth > 40:
        return left + right
    return (_adaptive(g, a, m, tol / 2, x, w, depth + 1, floor) +
            _adaptive(g, m, b, tol / 2, x, w, depth + 1, floor))


def direct_boundary(segments, coeffs, targets, delta, kind="single", nodes=20):
    """Boundary transform by composite Gauss-Legendre panels no longer than sqrt(delta) in arclength."""
    x, w = leggauss(nodes)
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.zeros(len(t))
    sd = math.sqrt(delta)
    W = WINDOW * sd
    probe = np.linspace(-1, 1, 65)
    rules = []
    for seg, dens in zip(segments, coeffs):
        cx, cy, dx, dy = _curve(seg, probe)
        length = np.hypot(dx, dy).max() * 2.0
        m = max(4, int(math.ceil(length / sd)))
        e = -1.0 + 2.0 * np.arange(m + 1) / m
        mid, rad = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
        s = (mid[:, None] + rad[:, None] * x).ravel()
        ws = (rad[:, None] * w).ravel()
        pad = 0.05 * (np.ptp(cx) + np.ptp(cy)) + 1e-12
        bb = (cx.min() - pad, cx.max() + pad, cy.min() - pad, cy.max() + pad)
        rules.append((bb, s, ws, _seg_integrand(seg, np.asarray(dens, float), None, delta, kind)))
    for i, ti in enumerate(t):
        acc = 0.0
        for bb, s, ws, make in rules:
            if ti[0] < bb[0] - W or ti[0] > bb[1] + W or ti[1] < bb[2] - W or ti[1] > bb[3] + W:
                continue
            acc += ws @ make(ti)(s)
        out[i] = acc
    return out


def curve_integral(segments, coeffs, tol=1e-14):
    """Integral of the density along the curve (total charge)."""
    x, w = leggauss(20)
    total = 0.0
    for seg, dens in zip(segments, coeffs):
        def g(s, seg=seg, dens=dens):
            _, _, dx, dy = _curve(seg, s)
            return legval(s, np.asarray(dens, float)) * np.hypot(dx, dy)
        total += _adaptive(g, -1.0, 1.0, tol, x, w)
    return total
