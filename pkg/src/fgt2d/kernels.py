"""Hot inner loops over point sources and point targets.

Every kernel has a numba version and a numpy version with identical
signatures.  The public names dispatch on ``_accel.USE_NUMBA``; pass
``use_numba=`` explicitly to pick one (the benchmark does this).

Conventions shared by all kernels:

* sources/targets are sorted by leaf; ``*_off`` arrays are CSR offsets;
* ``dip`` holds the dipole vector (strength times unit direction) per source,
  the dipole field being ``(2/delta) (x - y).dip exp(-|x-y|^2/delta)``;
* ``shift`` is the absolute displacement added to source coordinates
  (periodic images), one row per pair.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit


# ---------------------------------------------------------------- numba ----

@njit
def _hermite_row(x, n, out):
    h0 = math.exp(-x * x)
    out[0] = h0
    if n > 1:
        out[1] = 2.0 * x * h0
    for j in range(1, n - 1):
        out[j + 1] = 2.0 * x * out[j] - 2.0 * j * out[j - 1]


@njit
def _scaled_powers_row(u, n, out):
    out[0] = 1.0
    for j in range(1, n):
        out[j] = out[j - 1] * u / j


@njit
def _p2p_nb(tx, t_off, sx, sq, dip, s_off, pt, ps, shift, delta, r2max, out):
    inv = 1.0 / delta
    for m in range(pt.shape[0]):
        tl = pt[m]
        sl = ps[m]
        ox = shift[m, 0]
        oy = shift[m, 1]
        for i in range(t_off[tl], t_off[tl + 1]):
            x0 = tx[i, 0]
            x1 = tx[i, 1]
            acc = 0.0
            for j in range(s_off[sl], s_off[sl + 1]):
                d0 = x0 - sx[j, 0] - ox
                d1 = x1 - sx[j, 1] - oy
                r2 = d0 * d0 + d1 * d1
                if r2 > r2max:
                    continue
                g = math.exp(-r2 * inv)
                acc += g * (sq[j] + 2.0 * inv * (d0 * dip[j, 0] + d1 * dip[j, 1]))
            out[i] += acc


@njit
def _p2h_nb(sx, sq, dip, s_off, centers, sqrt_delta, p, out):
    P1 = np.empty(p + 1)
    P2 = np.empty(p + 1)
    inv = 1.0 / sqrt_delta
    for b in range(centers.shape[0]):
        for j in range(s_off[b], s_off[b + 1]):
            u1 = (sx[j, 0] - centers[b, 0]) * inv
            u2 = (sx[j, 1] - centers[b, 1]) * inv
            _scaled_powers_row(u1, p, P1)
            _scaled_powers_row(u2, p, P2)
            q = sq[j]
            d1 = dip[j, 0] * inv
            d2 = dip[j, 1] * inv
            for a in range(p):
                for c in range(p):
                    v = q * P1[a] * P2[c]
                    if a > 0:
                        v += d1 * P1[a - 1] * P2[c]
                    if c > 0:
                        v += d2 * P1[a] * P2[c - 1]
                    out[b, a, c] += v


@njit
def _h2p_nb(tx, t_off, pt, ps, shift, A, centers, sqrt_delta, out):
    p = A.shape[1]
    H1 = np.empty(p)
    H2 = np.empty(p)
    inv = 1.0 / sqrt_delta
    for m in range(pt.shape[0]):
        tl = pt[m]
        sb = ps[m]
        c0 = centers[sb, 0] + shift[m, 0]
        c1 = centers[sb, 1] + shift[m, 1]
        for i in range(t_off[tl], t_off[tl + 1]):
            _hermite_row((tx[i, 0] - c0) * inv, p, H1)
            _hermite_row((tx[i, 1] - c1) * inv, p, H2)
            acc = 0.0
            for a in range(p):
                row = 0.0
                for c in range(p):
                    row += A[sb, a, c] * H2[c]
                acc += H1[a] * row
            out[i] += acc


@njit
def _l2p_nb(tx, t_off, C, centers, sqrt_delta, out):
    p = C.shape[1]
    inv = 1.0 / sqrt_delta
    for b in range(centers.shape[0]):
        for i in range(t_off[b], t_off[b + 1]):
            w1 = (tx[i, 0] - centers[b, 0]) * inv
            w2 = (tx[i, 1] - centers[b, 1]) * inv
            acc = 0.0
            for a in range(p - 1, -1, -1):
                row = 0.0
                for c in range(p - 1, -1, -1):
                    row = row * w2 + C[b, a, c]
                acc = acc * w1 + row
            out[i] += acc


@njit
def _p2l_nb(sx, sq, dip, s_off, ps, pt, shift, centers, sqrt_delta, p, out):
    H1 = np.empty(p + 1)
    H2 = np.empty(p + 1)
    fact = np.empty(p + 1)
    fact[0] = 1.0
    for j in range(1, p + 1):
        fact[j] = fact[j - 1] / j
    inv = 1.0 / sqrt_delta
    for m in range(ps.shape[0]):
        sl = ps[m]
        tb = pt[m]
        c0 = centers[tb, 0] - shift[m, 0]
        c1 = centers[tb, 1] - shift[m, 1]
        for j in range(s_off[sl], s_off[sl + 1]):
            _hermite_row((sx[j, 0] - c0) * inv, p + 1, H1)
            _hermite_row((sx[j, 1] - c1) * inv, p + 1, H2)
            q = sq[j]
            d1 = dip[j, 0] * inv
            d2 = dip[j, 1] * inv
            for a in range(p):
                for c in range(p):
                    v = q * H1[a] * H2[c] - d1 * H1[a + 1] * H2[c] - d2 * H1[a] * H2[c + 1]
                    out[tb, a, c] += v * fact[a] * fact[c]


# ---------------------------------------------------------------- numpy ----

def hermite_rows(x, n):
    """Hermite functions h_0..h_{n-1} at every entry of ``x``; shape x.shape + (n,)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n,))
    out[..., 0] = np.exp(-x * x)
    if n > 1:
        out[..., 1] = 2.0 * x * out[..., 0]
    for j in range(1, n - 1):
        out[..., j + 1] = 2.0 * x * out[..., j] - 2.0 * j * out[..., j - 1]
    return out


def scaled_power_rows(u, n):
    """u^a / a! for a < n; shape u.shape + (n,)."""
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (n,))
    out[..., 0] = 1.0
    for j in range(1, n):
        out[..., j] = out[..., j - 1] * u / j
    return out


def _p2p_np(tx, t_off, sx, sq, dip, s_off, pt, ps, shift, delta, r2max, out):
    inv = 1.0 / delta
    for m in range(len(pt)):
        t0, t1 = t_off[pt[m]], t_off[pt[m] + 1]
        s0, s1 = s_off[ps[m]], s_off[ps[m] + 1]
        if t0 == t1 or s0 == s1:
            continue
        d = tx[t0:t1, None, :] - (sx[None, s0:s1, :] + shift[m])
        r2 = d[..., 0] ** 2 + d[..., 1] ** 2
        g = np.where(r2 > r2max, 0.0, np.exp(-r2 * inv))
        w = sq[s0:s1] + 2.0 * inv * (d[..., 0] * dip[s0:s1, 0] + d[..., 1] * dip[s0:s1, 1])
        out[t0:t1] += (g * w).sum(axis=1)


def _p2h_np(sx, sq, dip, s_off, centers, sqrt_delta, p, out):
    counts = np.diff(s_off)
    if counts.sum() == 0:
        return
    owner = np.repeat(np.arange(len(counts)), counts)
    u = (sx[s_off[0]:s_off[-1]] - centers[owner]) / sqrt_delta
    P1 = scaled_power_rows(u[:, 0], p + 1)
    P2 = scaled_power_rows(u[:, 1], p + 1)
    q = sq[s_off[0]:s_off[-1]]
    d = dip[s_off[0]:s_off[-1]] / sqrt_delta
    F1 = q[:, None] * P1[:, :p]
    F1[:, 1:] += d[:, 0:1] * P1[:, : p - 1]
    terms = np.einsum("na,nc->nac", F1, P2[:, :p])
    G2 = np.zeros((len(q), p))
    G2[:, 1:] = P2[:, : p - 1]
    terms += np.einsum("na,nc->nac", d[:, 1:2] * P1[:, :p], G2)
    nz = np.flatnonzero(counts)
    out[nz] += np.add.reduceat(terms, s_off[nz] - s_off[0], axis=0)


def _h2p_np(tx, t_off, pt, ps, shift, A, centers, sqrt_delta, out):
    p = A.shape[1]
    for m in range(len(pt)):
        t0, t1 = t_off[pt[m]], t_off[pt[m] + 1]
        if t0 == t1:
            continue
        c = centers[ps[m]] + shift[m]
        H1 = hermite_rows((tx[t0:t1, 0] - c[0]) / sqrt_delta, p)
        H2 = hermite_rows((tx[t0:t1, 1] - c[1]) / sqrt_delta, p)
        out[t0:t1] += np.einsum("na,ac,nc->n", H1, A[ps[m]], H2)


def _l2p_np(tx, t_off, C, centers, sqrt_delta, out):
    p = C.shape[1]
    counts = np.diff(t_off)
    if counts.sum() == 0:
        return
    owner = np.repeat(np.arange(len(counts)), counts)
    sl = slice(t_off[0], t_off[-1])
    w = (tx[sl] - centers[owner]) / sqrt_delta
    W1 = w[:, 0:1] ** np.arange(p)
    W2 = w[:, 1:2] ** np.arange(p)
    out[sl] += np.einsum("na,nac,nc->n", W1, C[owner], W2)


def _p2l_np(sx, sq, dip, s_off, ps, pt, shift, centers, sqrt_delta, p, out):
    fact = scaled_power_rows(np.ones(()), p)  # 1/a!
    for m in range(len(ps)):
        s0, s1 = s_off[ps[m]], s_off[ps[m] + 1]
        if s0 == s1:
            continue
        c = centers[pt[m]] - shift[m]
        H1 = hermite_rows((sx[s0:s1, 0] - c[0]) / sqrt_delta, p + 1)
        H2 = hermite_rows((sx[s0:s1, 1] - c[1]) / sqrt_delta, p + 1)
        q = sq[s0:s1, None]
        d = dip[s0:s1] / sqrt_delta
        F1 = q * H1[:, :p] - d[:, 0:1] * H1[:, 1:]
        acc = np.einsum("na,nc->ac", F1, H2[:, :p])
        acc -= np.einsum("na,nc->ac", d[:, 1:2] * H1[:, :p], H2[:, 1:])
        out[pt[m]] += acc * fact[:, None] * fact[None, :]


# ------------------------------------------------------------- dispatch ----

def _pick(use_numba):
    return _accel.USE_NUMBA if use_numba is None else (use_numba and _accel.HAVE_NUMBA)


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def p2p(tx, t_off, sx, sq, dip, s_off, pt, ps, shift, delta, out, r2max=np.inf, use_numba=None):
    """Direct Gaussian (and dipole) sums over the listed (target leaf, source leaf) pairs."""
    fn = _p2p_nb if _pick(use_numba) else _p2p_np
    fn(_f(tx), _i(t_off), _f(sx), _f(sq), _f(dip), _i(s_off), _i(pt), _i(ps),
       _f(shift).reshape(-1, 2), float(delta), float(r2max), out)
    return out


def p2h(sx, sq, dip, s_off, centers, sqrt_delta, p, use_numba=None):
    """Hermite coefficients (len(centers), p, p) of the sources owned by each box."""
    out = np.zeros((len(centers), p, p))
    fn = _p2h_nb if _pick(use_numba) else _p2h_np
    fn(_f(sx), _f(sq), _f(dip), _i(s_off), _f(centers).reshape(-1, 2), float(sqrt_delta), int(p), out)
    return out


def h2p(tx, t_off, pt, ps, shift, A, centers, sqrt_delta, out, use_numba=None):
    """Evaluate Hermite expansions ``A[ps]`` at the targets of leaves ``pt``."""
    fn = _h2p_nb if _pick(use_numba) else _h2p_np
    fn(_f(tx), _i(t_off), _i(pt), _i(ps), _f(shift).reshape(-1, 2), _f(A), _f(centers).reshape(-1, 2),
       float(sqrt_delta), out)
    return out


def l2p(tx, t_off, C, centers, sqrt_delta, out, use_numba=None):
    """Evaluate local expansion ``C[b]`` at the targets of box ``b``."""
    fn = _l2p_nb if _pick(use_numba) else _l2p_np
    fn(_f(tx), _i(t_off), _f(C), _f(centers).reshape(-1, 2), float(sqrt_delta), out)
    return out


def p2l(sx, sq, dip, s_off, ps, pt, shift, centers, sqrt_delta, p, out, use_numba=None):
    """Accumulate into ``out[pt]`` the local expansions of the point sources in leaves ``ps``.

    ``shift`` is the displacement of the source image as seen from the target box.
    """
    fn = _p2l_nb if _pick(use_numba) else _p2l_np
    fn(_f(sx), _f(sq), _f(dip), _i(s_off), _i(ps), _i(pt), _f(shift).reshape(-1, 2),
       _f(centers).reshape(-1, 2), float(sqrt_delta), int(p), out)
    return out
