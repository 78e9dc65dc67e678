"""Hermite, local (Taylor) and plane-wave expansions of Gaussian fields.

Coefficient tensors are truncated tensor-style: an order-``p`` expansion
keeps the ``p * p`` multi-indices with both components below ``p``.  Every
translation is applied as a pair of 1D matrices, ``B = S1 @ A @ S2.T``,
so one translation costs O(p^3).
"""
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import basis
from .kernels import hermite_rows, scaled_power_rows

K_CRAMER = 1.09
PMAX = 120

# multiply-add counts per translation kind, for the complexity checks
OPS = Counter()


def hermite_1d(n, x):
    """h_n(x) = (-1)^n d^n/dx^n exp(-x^2) via the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return hermite_rows(x, n + 1)[..., n]


def hermite_table(nmax, x):
    return hermite_rows(x, nmax + 1)


def inv_factorials(n):
    return scaled_power_rows(np.ones(()), n)


@dataclass
class HermiteExpansion:
    center: np.ndarray
    sqrt_delta: float
    coeffs: np.ndarray

    @property
    def p(self):
        return self.coeffs.shape[0]

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)


@dataclass
class LocalExpansion:
    center: np.ndarray
    sqrt_delta: float
    coeffs: np.ndarray

    @property
    def p(self):
        return self.coeffs.shape[0]

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)


@dataclass
class PlaneWaveExpansion:
    center: np.ndarray
    sqrt_delta: float
    nodes: np.ndarray
    step: float
    weights: np.ndarray

    @property
    def p_t(self):
        return len(self.nodes)


# ------------------------------------------------------------ formation ----

def form_hermite_from_points(points, strengths, center, sqrt_delta, p, dipoles=None):
    """Hermite expansion of charges (and optional dipole vectors) about ``center``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = np.asarray(strengths, dtype=float).reshape(-1)
    u = (points - np.asarray(center)) / sqrt_delta
    P1 = scaled_power_rows(u[:, 0], p)
    P2 = scaled_power_rows(u[:, 1], p)
    A = np.einsum("n,na,nc->ac", q, P1, P2)
    if dipoles is not None:
        d = np.atleast_2d(np.asarray(dipoles, dtype=float)) / sqrt_delta
        A[1:, :] += np.einsum("n,na,nc->ac", d[:, 0], P1[:, : p - 1], P2)
        A[:, 1:] += np.einsum("n,na,nc->ac", d[:, 1], P1, P2[:, : p - 1])
    return HermiteExpansion(center, sqrt_delta, A)


def moment_matrix(side, sqrt_delta, p, k, kind=None):
    """M[a, n] = (1/a!) * integral over [-side/2, side/2] of (y/sqrt_delta)^a b_n(2y/side) dy."""
    kind = kind or basis.basis_kind(k)
    x, w = leggauss((p + k) // 2 + 2)
    h = side / 2.0
    P = scaled_power_rows(x * (h / sqrt_delta), p)
    B = basis.eval_basis(kind, k, x)
    return h * np.einsum("i,ia,in->an", w, P, B)


def form_hermite_from_leaf(coeffs, center, side, sqrt_delta, p, kind=None):
    """Hermite expansion of a leaf polynomial given as a (k, k) coefficient matrix."""
    coeffs = np.asarray(coeffs, dtype=float)
    M = moment_matrix(side, sqrt_delta, p, coeffs.shape[0], kind)
    return HermiteExpansion(center, sqrt_delta, M @ coeffs @ M.T)


# ---------------------------------------------------------- translations ----

def h2h_matrix(d, p_in, p_out):
    """S[b, a] = d^(b-a) / (b-a)! for a <= b, with d = (s_old - s_new)/sqrt_delta."""
    P = scaled_power_rows(d, max(p_in, p_out))
    i = np.arange(p_out)[:, None] - np.arange(p_in)[None, :]
    return np.where(i >= 0, P[np.clip(i, 0, None)], 0.0)


def h2l_matrix(d, p_in, q):
    """H[b, a] = (-1)^b / b! * h_{a+b}(d), with d = (t_C - s_B)/sqrt_delta."""
    h = hermite_rows(d, p_in + q - 1)
    idx = np.arange(q)[:, None] + np.arange(p_in)[None, :]
    sgn = inv_factorials(q) * (-1.0) ** np.arange(q)
    return sgn[:, None] * h[idx]


def l2l_matrix(d, p_in, p_out):
    """L[b, a] = binom(a, b) d^(a-b) for a >= b, with d = (t_new - t_old)/sqrt_delta."""
    a = np.arange(p_in)[None, :]
    b = np.arange(p_out)[:, None]
    e = a - b
    binom = np.vectorize(math.comb, otypes=[float])(np.broadcast_to(a, e.shape), np.broadcast_to(b, e.shape))
    return np.where(e >= 0, binom * np.float64(d) ** np.clip(e, 0, None), 0.0)


def _apply(S1, A, S2, kind):
    OPS[kind] += S1.shape[0] * S1.shape[1] * A.shape[1] + S1.shape[0] * A.shape[1] * S2.shape[0]
    return S1 @ A @ S2.T


def h2h_shift(expansion, new_center, p_out=None):
    p_out = p_out or expansion.p
    d = (expansion.center - np.asarray(new_center, dtype=float)) / expansion.sqrt_delta
    B = _apply(h2h_matrix(d[0], expansion.p, p_out), expansion.coeffs, h2h_matrix(d[1], expansion.p, p_out), "h2h")
    return HermiteExpansion(new_center, expansion.sqrt_delta, B)


def h2l_translate(hermite, target_center, q=None):
    q = q or hermite.p
    d = (np.asarray(target_center, dtype=float) - hermite.center) / hermite.sqrt_delta
    C = _apply(h2l_matrix(d[0], hermite.p, q), hermite.coeffs, h2l_matrix(d[1], hermite.p, q), "h2l")
    return LocalExpansion(target_center, hermite.sqrt_delta, C)


def l2l_shift(local, child_center, p_out=None):
    p_out = p_out or local.p
    d = (np.asarray(child_center, dtype=float) - local.center) / local.sqrt_delta
    C = _apply(l2l_matrix(d[0], local.p, p_out), local.coeffs, l2l_matrix(d[1], local.p, p_out), "l2l")
    return LocalExpansion(child_center, local.sqrt_delta, C)


# ------------------------------------------------------------ evaluation ----

def eval_hermite(expansion, targets):
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    v = (t - expansion.center) / expansion.sqrt_delta
    H1 = hermite_rows(v[:, 0], expansion.p)
    H2 = hermite_rows(v[:, 1], expansion.p)
    out = np.einsum("na,ac,nc->n", H1, expansion.coeffs, H2)
    return out if np.ndim(targets) > 1 else out[0]


def eval_local(local, targets):
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    w = (t - local.center) / local.sqrt_delta
    out = np.zeros(len(t))
    for a in range(local.p - 1, -1, -1):
        row = np.zeros(len(t))
        for c in range(local.p - 1, -1, -1):
            row = row * w[:, 1] + local.coeffs[a, c]
        out = out * w[:, 0] + row
    return out if np.ndim(targets) > 1 else out[0]


# ------------------------------------------------------- order selection ----

def _log_term(r, n):
    if r == 0.0:
        return 0.0 if n == 0 else -np.inf
    return n * math.log(r) - 0.5 * math.lgamma(n + 1)


def S_r(r, p):
    """sum_{n=0}^{p} r^n / sqrt(n!)."""
    return float(sum(math.exp(_log_term(r, n)) for n in range(p + 1)))


def T_r(r, p, eps=1e-16, cap=500):
    """sum_{n>=p} r^n / sqrt(n!), stopped past the peak once terms drop below eps*1e-3."""
    total = 0.0
    for n in range(p, p + cap):
        t = math.exp(_log_term(r, n))
        total += t
        if n > r * r and t < eps * 1e-3:
            break
    return total


def hermite_error_bound(r, p, eps=1e-16):
    """Separated-box Hermite truncation bound per unit source mass."""
    S, T = S_r(r, p), T_r(r, p, eps)
    return K_CRAMER ** 2 * math.exp(-9.0 * r * r / 8.0) * (2 * S + T) * T


def local_error_bound(r, p, eps=1e-16):
    """Hermite-to-local truncation bound per unit source mass."""
    S, T = S_r(r, p), T_r(r, p, eps)
    return K_CRAMER ** 2 * math.exp(-2.0 * r * r) * (2 * S + T) * T * S * S


def uniform_error_bound(r, p, eps=1e-16):
    """Hermite truncation bound valid at every target (no separation)."""
    S, T = S_r(r, p), T_r(r, p, eps)
    return K_CRAMER ** 2 * (2 * S + T) * T


def _smallest_order(bound, r, eps, pmax=PMAX):
    for p in range(1, pmax + 1):
        if bound(r, p, eps) <= eps:
            return p
    return pmax


@dataclass
class TruncationPlan:
    delta: float
    eps: float
    r_c: float
    l_cut: int
    levels: int
    hermite_order: dict = field(default_factory=dict)
    local_order: dict = field(default_factory=dict)
    pw_nodes: dict = field(default_factory=dict)
    K: float = K_CRAMER

    def as_dict(self):
        return {
            "delta": self.delta, "eps": self.eps, "r_c": self.r_c, "l_cut": self.l_cut,
            "levels": self.levels, "K": self.K,
            "hermite_order": {int(l): int(p) for l, p in self.hermite_order.items()},
            "local_order": {int(l): int(p) for l, p in self.local_order.items()},
            "pw_nodes": {int(l): int(p) for l, p in self.pw_nodes.items()},
        }


def cutoff_radius(eps):
    """r_c with exp(-r_c^2) = eps."""
    return math.sqrt(math.log(1.0 / eps))


def choose_orders(delta, eps, levels, l_cut, side0=1.0):
    """Per-level Hermite/local orders and plane-wave node counts for levels l_cut..levels."""
    sd = math.sqrt(delta)
    rc = cutoff_radius(eps)
    plan = TruncationPlan(delta=delta, eps=eps, r_c=rc, l_cut=l_cut, levels=levels)
    for l in range(max(l_cut, 0), levels + 1):
        r = side0 * 0.5 ** l / sd
        ph = _smallest_order(hermite_error_bound, r, eps)
        pl = max(ph, _smallest_order(local_error_bound, r, eps))
        plan.hermite_order[l] = ph
        plan.local_order[l] = pl
        plan.pw_nodes[l] = len(planewave_nodes(r, eps)[0])
    return plan


# ----------------------------------------------------------- plane waves ----

def planewave_nodes(r, eps):
    """Trapezoid nodes for the plane-wave integral at box size r (units of sqrt(delta)).

    Translation distances reach 4 r, so the step resolves exp(i k x) over
    |x| <= 4 r plus an r_c margin; the window stops where exp(-k^2/4) falls
    below eps.
    """
    rc = cutoff_radius(eps)
    h = 2.0 * math.pi / (4.0 * r + rc + 1.0)
    kmax = 2.0 * rc + 1.0
    n = int(math.ceil(kmax / h))
    return h * np.arange(-n, n + 1), h


def pw_from_hermite_matrix(nodes, p):
    """M[j, a] = (-i k_j)^a."""
    return (-1j * nodes[:, None]) ** np.arange(p)[None, :]


def pw_to_local_matrix(nodes, step, q):
    """L[b, j] = (i k_j)^b / b! * exp(-k_j^2/4) * step / sqrt(4 pi)."""
    P = scaled_power_rows(np.ones(()), q)
    V = (1j * nodes[None, :]) ** np.arange(q)[:, None]
    return P[:, None] * V * (np.exp(-nodes ** 2 / 4.0) * step / math.sqrt(4.0 * math.pi))[None, :]


def hermite_to_planewave(hermite, nodes, step):
    M = pw_from_hermite_matrix(nodes, hermite.p)
    OPS["h2pw"] += len(nodes) * hermite.p * (hermite.p + len(nodes))
    W = M @ hermite.coeffs @ M.T
    return PlaneWaveExpansion(hermite.center, hermite.sqrt_delta, np.asarray(nodes), step, W)


def planewave_translate(pw, new_center):
    """Diagonal translation to a new center."""
    d = (np.asarray(new_center, dtype=float) - pw.center) / pw.sqrt_delta
    e1 = np.exp(1j * pw.nodes * d[0])
    e2 = np.exp(1j * pw.nodes * d[1])
    OPS["pw_translate"] += pw.p_t ** 2
    return PlaneWaveExpansion(np.asarray(new_center, dtype=float), pw.sqrt_delta, pw.nodes, pw.step,
                              pw.weights * e1[:, None] * e2[None, :])


def planewave_to_local(pw, q):
    L = pw_to_local_matrix(pw.nodes, pw.step, q)
    OPS["pw2l"] += q * pw.p_t * (pw.p_t + q)
    C = (L @ pw.weights @ L.T).real
    return LocalExpansion(pw.center, pw.sqrt_delta, C)


# ------------------------------------------------- sharp order selection ----

def _one_dim_errors(r, pmax, n=33):
    """Worst 1D truncation errors over source/target placements at box offsets 0..3.

    Returns (gmax, herm, loc): gmax[o] is the largest kernel value, herm[o, p]
    the Hermite-evaluation error and loc[o, p] the Hermite-to-local error with
    p terms in both series.
    """
    u = np.linspace(-0.5, 0.5, n) * r
    w = np.linspace(-0.5, 0.5, n) * r
    P = scaled_power_rows(u, pmax + 1)  # u^a/a!
    W = w[:, None] ** np.arange(pmax + 1)[None, :]
    gmax = np.zeros(4)
    herm = np.zeros((4, pmax + 1))
    loc = np.zeros((4, pmax + 1))
    for o in range(4):
        v = o * r + w
        exact = np.exp(-(v[None, :] - u[:, None]) ** 2)
        gmax[o] = exact.max()
        Hv = hermite_rows(v, pmax + 1)
        partial = np.cumsum(P[:, None, :] * Hv[None, :, :], axis=2)
        herm[o, 1:] = np.abs(exact[:, :, None] - partial[:, :, :pmax]).max(axis=(0, 1))
        herm[o, 0] = gmax[o]
        hd = hermite_rows(np.float64(o * r), 2 * pmax + 1)
        for p in range(1, pmax + 1):
            Hm = (-1.0) ** np.arange(p)[:, None] * inv_factorials(p)[:, None] * \
                hd[np.arange(p)[:, None] + np.arange(p)[None, :]]
            approx = W[:, :p] @ Hm @ P[:, :p].T  # (target w, source u)
            loc[o, p] = np.abs(exact.T - approx).max()
        loc[o, 0] = gmax[o]
    return gmax, herm, loc


def kept_offsets(r, rc):
    """Interaction-list offsets (in box units, first quadrant) closer than rc (units of sqrt(delta))."""
    out = []
    for a in range(4):
        for b in range(4):
            if max(a, b) < 2:
                continue
            gap2 = (max(a - 1, 0) * r) ** 2 + (max(b - 1, 0) * r) ** 2
            if gap2 < rc * rc:
                out.append((a, b))
    return out


def _two_dim(g, e, offsets):
    """Worst tensor-product error over the given 2D offsets."""
    best = np.zeros(e.shape[1])
    for a, b in offsets:
        best = np.maximum(best, e[a] * g[b] + g[a] * e[b] + e[a] * e[b])
    return best


def sharp_order(r, eps, pmax=PMAX, safety=0.02):
    """Smallest order whose measured worst-case far-field error is at most safety*eps.

    The error is measured for a unit source anywhere in a box of side r
    (units of sqrt(delta)) and targets anywhere in boxes at interaction-list
    offsets, for both direct Hermite evaluation and the Hermite-to-local path.
    Offsets whose boxes are at least r_c apart are dropped by the caller and
    left out here.
    """
    offsets = kept_offsets(r, cutoff_radius(eps))
    if not offsets:
        return 1
    hi = 8
    while True:
        g, eh, el = _one_dim_errors(r, hi)
        err = np.maximum(_two_dim(g, eh, offsets), _two_dim(g, el, offsets))
        ok = np.flatnonzero(err[1:] <= safety * eps)
        if len(ok):
            return int(ok[0]) + 1
        if hi >= pmax:
            return pmax
        hi = min(pmax, 2 * hi)


def choose_orders_sharp(delta, eps, levels, l_cut, side0=1.0):
    """Per-level orders from measured truncation errors (see :func:`sharp_order`)."""
    sd = math.sqrt(delta)
    rc = cutoff_radius(eps)
    plan = TruncationPlan(delta=delta, eps=eps, r_c=rc, l_cut=l_cut, levels=levels)
    for l in range(max(l_cut, 0), levels + 1):
        r = side0 * 0.5 ** l / sd
        p = sharp_order(r, eps)
        plan.hermite_order[l] = p
        plan.local_order[l] = p
        plan.pw_nodes[l] = len(planewave_nodes(r, eps)[0])
    return plan
