"""Single- and double-layer Gauss transforms over piecewise Legendre curves.

Each segment is a map s -> (x1(s), x2(s)) on [-1, 1] given by Legendre
coefficients, carrying a density in the same basis.  The k-point
Gauss-Legendre rule on every segment turns the curve into point charges
(single layer) or dipoles along the outward normal (double layer), which go
through the point FGT.  When the kernel is too narrow for that rule,
targets near a segment get a correction: the segment's k-point contribution
is replaced by a composite k_c-point rule over the part of the segment inside
the disk |t - y| < sqrt(delta ln(1/eps)).
"""
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.spatial import cKDTree
from scipy.special import erf

from .engine import discrete_transform

KC = 20
SCAN = 64
PANEL_SDS = 4.0  # composite-panel arclength in units of sqrt(delta)


class DegenerateSegment(ValueError):
    pass


def legendre_fit(fn, k):
    """k Legendre coefficients interpolating ``fn`` at the k Gauss-Legendre nodes."""
    x, w = leg.leggauss(k)
    V = leg.legvander(x, k - 1)
    # discrete orthogonality of P_n at the k nodes gives the interpolant
    return (V * (w * np.asarray(fn(x), dtype=float))[:, None]).sum(axis=0) * (2 * np.arange(k) + 1) / 2.0


@dataclass
class BoundarySegment:
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        if self.x1.shape != self.x2.shape:
            raise ValueError("x1 and x2 need the same number of coefficients")
        self._d1 = leg.legder(self.x1)
        self._d2 = leg.legder(self.x2)

    @property
    def order(self):
        return len(self.x1)

    def point(self, s):
        return np.stack([leg.legval(s, self.x1), leg.legval(s, self.x2)], axis=-1)

    def tangent(self, s):
        return np.stack([leg.legval(s, self._d1), leg.legval(s, self._d2)], axis=-1)

    def speed(self, s):
        return np.linalg.norm(self.tangent(s), axis=-1)

    def normal(self, s):
        """Unit normal (dy, -dx)/|.|, outward for counter-clockwise curves."""
        d = self.tangent(s)
        return np.stack([d[..., 1], -d[..., 0]], axis=-1) / np.linalg.norm(d, axis=-1)[..., None]

    @functools.cached_property
    def length(self):
        x, w = leg.leggauss(max(32, 2 * self.order))
        return float(w @ self.speed(x))

    @property
    def center(self):
        return self.point(0.0)


@dataclass
class BoundaryDensity:
    coeffs: list
    kind: str = "single"

    def __post_init__(self):
        if self.kind not in ("single", "double"):
            raise ValueError("density kind must be 'single' or 'double'")
        self.coeffs = [np.asarray(c, dtype=float) for c in self.coeffs]

    def values(self, j, s):
        return leg.legval(s, self.coeffs[j])


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    jac_weights: np.ndarray
    normals: np.ndarray
    strengths: np.ndarray
    dipoles: np.ndarray = None
    segment_of: np.ndarray = field(default=None)


def discretize_boundary(segments, density):
    """Point charges (single layer) or normal dipoles (double layer) from the k-point rule."""
    if len(segments) != len(density.coeffs):
        raise ValueError("one density per segment required")
    if not segments:
        z = np.zeros((0, 2))
        return QuadratureRule(np.zeros(0), np.zeros(0), z, np.zeros(0), z, np.zeros(0), z, np.zeros(0, int))
    k = segments[0].order
    for seg, c in zip(segments, density.coeffs):
        if seg.order != k or len(c) != k:
            raise ValueError("all segments and densities must share the order k")
    s, w = leg.leggauss(k)
    pts, jw, nrm, sig = [], [], [], []
    for j, seg in enumerate(segments):
        sp = seg.speed(s)
        if (sp <= 1e-14 * max(1.0, np.abs(seg.x1).max() + np.abs(seg.x2).max())).any():
            raise DegenerateSegment(f"segment {j} has a vanishing arclength jacobian")
        pts.append(seg.point(s))
        jw.append(w * sp)
        nrm.append(seg.normal(s))
        sig.append(density.values(j, s))
    pts, jw, nrm, sig = np.concatenate(pts), np.concatenate(jw), np.concatenate(nrm), np.concatenate(sig)
    q = sig * jw
    seg_of = np.repeat(np.arange(len(segments)), k)
    if density.kind == "single":
        return QuadratureRule(s, w, pts, jw, nrm, q, None, seg_of)
    return QuadratureRule(s, w, pts, jw, nrm, np.zeros(len(q)), q[:, None] * nrm, seg_of)


# ---------------------------------------------------------- classification ----

def resolution_constant(eps):
    """C(eps) = 2 sqrt(ln(1/eps)): exp(-C^2/4) = eps."""
    return 2.0 * math.sqrt(math.log(1.0 / eps))


@functools.lru_cache(maxsize=None)
def gauss_legendre_limit(eps, k):
    """Largest |Gamma|/sqrt(delta) for which the k-point rule integrates a straight-line Gaussian to eps.

    Worst case over on-curve target positions, error measured per unit length.
    """
    s, w = leg.leggauss(k)
    u = np.linspace(-1.0, 1.0, 201)

    def err(c):
        a = 0.5 * c
        approx = np.exp(-(a * (s[None, :] - u[:, None])) ** 2) @ w
        exact = 0.5 * math.sqrt(math.pi) / a * (erf(a * (1 - u)) + erf(a * (1 + u)))
        return np.abs(approx - exact).max() * 0.5

    lo, hi = 0.0, 4.0
    while err(hi) <= eps and hi < 1e3:
        lo, hi = hi, 2 * hi
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if err(mid) <= eps:
            lo = mid
        else:
            hi = mid
    return lo


def resolution_threshold(eps, k):
    return min(resolution_constant(eps), gauss_legendre_limit(0.1 * eps, k))


def classify_segment(segment, delta, eps):
    """'resolved' when |Gamma_j| <= C sqrt(delta), else 'needs_correction'."""
    c = resolution_threshold(eps, segment.order)
    return "resolved" if segment.length <= c * math.sqrt(delta) else "needs_correction"


# -------------------------------------------------------------- correction ----

def _kernel(t, y, n, delta, kind):
    r = t - y
    g = np.exp(-(r * r).sum(axis=-1) / delta)
    if kind == "double":
        g = g * (2.0 / delta) * (r * n).sum(axis=-1)
    return g


def disk_intervals(segment, t, radius, scan=SCAN, tol=1e-12):
    """Parameter intervals [s_l, s_r] of the segment lying inside the disk |t - y| < radius."""
    s = np.linspace(-1.0, 1.0, scan + 1)
    g = ((segment.point(s) - t) ** 2).sum(axis=1) - radius ** 2
    inside = g < 0
    if not inside.any():
        return []

    def f(x):
        return float(((segment.point(x) - t) ** 2).sum() - radius ** 2)

    def root(a, b):
        fa = f(a)
        while b - a > tol:
            m = 0.5 * (a + b)
            fm = f(m)
            if (fm < 0) == (fa < 0):
                a, fa = m, fm
            else:
                b = m
        return 0.5 * (a + b)

    out = []
    i = 0
    while i <= scan:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 <= scan and inside[j + 1]:
            j += 1
        sl = -1.0 if i == 0 else root(s[i - 1], s[i])
        sr = 1.0 if j == scan else root(s[j], s[j + 1])
        out.append((sl, sr))
        i = j + 1
    return out


def _composite_rule(segment, a, b, delta, kc):
    x, w = leg.leggauss(kc)
    probe = np.linspace(a, b, 9)
    arc = (b - a) * segment.speed(probe).max()
    m = max(1, int(math.ceil(arc / (PANEL_SDS * math.sqrt(delta)))))
    e = a + (b - a) * np.arange(m + 1) / m
    mid, rad = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
    return (mid[:, None] + rad[:, None] * x).ravel(), (rad[:, None] * w).ravel()


def correct_near_targets(segment, density_coeffs, targets, delta, eps, kind="single", kc=KC):
    """Per-target corrections: accurate disk integral minus the segment's k-point contribution."""
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.zeros(len(t))
    radius = math.sqrt(delta * math.log(1.0 / eps))
    s, w = leg.leggauss(segment.order)
    y = segment.point(s)
    n = segment.normal(s)
    q = leg.legval(s, density_coeffs) * w * segment.speed(s)
    for i, ti in enumerate(t):
        ivals = disk_intervals(segment, ti, radius)
        if not ivals:
            continue
        acc = 0.0
        for a, b in ivals:
            u, wu = _composite_rule(segment, a, b, delta, kc)
            yu = segment.point(u)
            nu = segment.normal(u) if kind == "double" else None
            qu = leg.legval(u, density_coeffs) * wu * segment.speed(u)
            acc += _kernel(ti, yu, nu, delta, kind) @ qu
        out[i] = acc - _kernel(ti, y, n, delta, kind) @ q
    return out


# --------------------------------------------------------------- transform ----

@dataclass
class BoundaryResult:
    values: np.ndarray
    flagged: np.ndarray
    stats: dict


def run_boundary(segments, density, delta, eps, targets, kc=KC, corrections=True, **engine_kw):
    """Boundary transform at ``targets``: point FGT on the k-point rule plus near corrections."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    rule = discretize_boundary(segments, density)
    if len(rule.points) == 0 or not np.any(rule.strengths) and (rule.dipoles is None or not rule.dipoles.any()):
        return BoundaryResult(np.zeros(len(targets)), np.zeros(len(segments), bool), {"corrected_pairs": 0})
    res = discrete_transform(rule.points, rule.strengths, targets, delta, eps, dipoles=rule.dipoles, **engine_kw)
    values = res.point_values.copy()
    flagged = np.array([classify_segment(seg, delta, eps) == "needs_correction" for seg in segments])
    pairs = 0
    if corrections and flagged.any():
        radius = math.sqrt(delta * math.log(1.0 / eps))
        tree = cKDTree(targets)
        probe = np.linspace(-1.0, 1.0, SCAN + 1)
        for j in np.flatnonzero(flagged):
            seg = segments[j]
            pts = seg.point(probe)
            gap = np.linalg.norm(np.diff(pts, axis=0), axis=1).max()
            cand = sorted(set().union(*tree.query_ball_point(pts, radius + gap)))
            if not cand:
                continue
            cand = np.asarray(cand)
            values[cand] += correct_near_targets(seg, density.coeffs[j], targets[cand], delta, eps, density.kind, kc)
            pairs += len(cand)
    stats = dict(res.stats)
    stats["corrected_pairs"] = pairs
    stats["flagged_segments"] = int(flagged.sum())
    return BoundaryResult(values, flagged, stats)
