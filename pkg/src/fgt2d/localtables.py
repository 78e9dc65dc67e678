"""Near-field machinery: 1D Gaussian-polynomial integrals and their 2D use.

For a source interval of half-width ``h`` centred at 0,

    g(t, n) = integral_{-h}^{h} exp(-(t - y)^2 / delta) b_n(y / h) dy

with ``b_n`` the leaf basis.  2D weights factor as ``g(t1, n1) g(t2, n2)``, so
the grid field of a source leaf at a target leaf is ``Gx @ C @ Gy.T``.

Tables are keyed by the source level and the relative placement of the target
box: ``rel = level(T) - level(S)`` and the centre offset in units of a quarter
source side (``{-4, 0, 4}`` for same-level boxes, ``{-3, -1, 1, 3}`` for finer
targets, ``{-6, -2, 2, 6}`` for coarser targets).
"""
import math
import struct
import threading

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import basis
from .kernels import hermite_rows

WINDOW = 7.0  # integrand below exp(-49) outside t +- WINDOW*sqrt(delta)


def _panel_rule(n):
    x, w = leggauss(n)
    return x, w


def gauss_poly_integrals(t, half, delta, k, kind=None, nodes=16):
    """g[i, n] for targets ``t`` (1D, relative to the interval centre)."""
    kind = kind or basis.basis_kind(k)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    sd = math.sqrt(delta)
    lo = np.clip(t - WINDOW * sd, -half, half)
    hi = np.clip(t + WINDOW * sd, -half, half)
    width = min(sd, 2.0 * half) / 2.0
    m = max(1, int(math.ceil((hi - lo).max() / width))) if len(t) else 1
    x, w = _panel_rule(nodes)
    edges = lo[:, None] + (hi - lo)[:, None] * (np.arange(m + 1) / m)[None, :]
    a, b = edges[:, :-1], edges[:, 1:]
    mid, rad = 0.5 * (a + b), 0.5 * (b - a)
    y = (mid[:, :, None] + rad[:, :, None] * x).reshape(len(t), -1)
    wy = (rad[:, :, None] * w).reshape(len(t), -1)
    g = np.exp(-((t[:, None] - y) ** 2) / delta) * wy
    B = basis.eval_basis(kind, k, y / half)
    return np.einsum("ij,ijn->in", g, B)


def gauss_poly_integrals_at(t, c, half, delta, k, kind=None, chunk=20000):
    """Same integrals for per-row intervals: target t[i], interval centre c[i], half-width half[i]."""
    kind = kind or basis.basis_kind(k)
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    half = np.broadcast_to(np.asarray(half, dtype=float), t.shape)
    out = np.empty((len(t), k))
    sd = math.sqrt(delta)
    x, w = _panel_rule(16)
    for s in range(0, len(t), chunk):
        sl = slice(s, s + chunk)
        tt, cc, hh = t[sl] - c[sl], c[sl], half[sl]
        lo = np.clip(tt - WINDOW * sd, -hh, hh)
        hi = np.clip(tt + WINDOW * sd, -hh, hh)
        width = np.minimum(sd, 2.0 * hh) / 2.0
        m = max(1, int(math.ceil(((hi - lo) / width).max())))
        edges = lo[:, None] + (hi - lo)[:, None] * (np.arange(m + 1) / m)[None, :]
        mid, rad = 0.5 * (edges[:, :-1] + edges[:, 1:]), 0.5 * (edges[:, 1:] - edges[:, :-1])
        y = (mid[:, :, None] + rad[:, :, None] * x).reshape(len(tt), -1)
        wy = (rad[:, :, None] * w).reshape(len(tt), -1)
        g = np.exp(-((tt[:, None] - y) ** 2) / delta) * wy
        B = basis.eval_basis(kind, k, y / hh[:, None])
        out[sl] = np.einsum("ij,ijn->in", g, B)
    return out


def target_positions(rel, offset, side, k):
    """1D target nodes of the target box, relative to the source centre."""
    return offset * side / 4.0 + 0.5 * side * 0.5 ** rel * basis.cheb_nodes(k)


def build_gauss1d(side, delta, k, rel, offset, kind=None):
    """k-by-k table ``G[a, n]`` for one relative placement."""
    t = target_positions(rel, offset, side, k)
    return gauss_poly_integrals(t, side / 2.0, delta, k, kind)


def tdirect_factor(side, delta, p, k, offset, kind=None):
    """T[b, n] = (1/b!) * integral over the source interval of h_b((y - t)/sqrt(delta)) b_n(2y/side) dy.

    ``t = offset * side / 4`` is the centre of the finer target box.
    """
    kind = kind or basis.basis_kind(k)
    sd = math.sqrt(delta)
    half = side / 2.0
    t = offset * side / 4.0
    width = min(sd / 4.0, half)
    m = max(1, int(math.ceil(side / width)))
    x, w = _panel_rule(24)
    edges = -half + side * np.arange(m + 1) / m
    mid, rad = 0.5 * (edges[:-1] + edges[1:]), 0.5 * (edges[1:] - edges[:-1])
    y = (mid[:, None] + rad[:, None] * x).ravel()
    wy = (rad[:, None] * w).ravel()
    H = hermite_rows((y - t) / sd, p)
    inv = np.cumprod(np.concatenate([[1.0], 1.0 / np.arange(1, p)]))
    B = basis.eval_basis(kind, k, y / half)
    return inv[:, None] * np.einsum("j,ja,jn->an", wy, H, B)


class NearFieldTables:
    """Lazily built, cached near-field tables for one (delta, k, domain side)."""

    def __init__(self, delta, k, side0=1.0):
        self.delta = float(delta)
        self.k = int(k)
        self.side0 = float(side0)
        self.kind = basis.basis_kind(k)
        self._g = {}
        self._t = {}
        self._lock = threading.Lock()
        self.builds = 0

    def side(self, level):
        return self.side0 * 0.5 ** level

    def gauss1d(self, level, rel, offset):
        key = (int(level), int(rel), int(offset))
        tab = self._g.get(key)
        if tab is None:
            with self._lock:
                tab = self._g.get(key)
                if tab is None:
                    tab = build_gauss1d(self.side(level), self.delta, self.k, rel, offset, self.kind)
                    tab.flags.writeable = False
                    self._g[key] = tab
                    self.builds += 1
        return tab

    def tdirect(self, level, p, offset):
        """Factor for a source leaf at ``level`` and a target box one level finer."""
        key = (int(level), int(p), int(offset))
        tab = self._t.get(key)
        if tab is None:
            with self._lock:
                tab = self._t.get(key)
                if tab is None:
                    tab = tdirect_factor(self.side(level), self.delta, p, self.k, offset, self.kind)
                    tab.flags.writeable = False
                    self._t[key] = tab
                    self.builds += 1
        return tab

    # ---- application
    def pair_offsets(self, tree, pairs):
        """(source level, rel, offx, offy) per near pair."""
        ls = tree.level[pairs.src]
        rel = tree.level[pairs.tgt] - ls
        q = tree.side_of(ls) / 4.0
        d = tree.centers[pairs.tgt] - (tree.centers[pairs.src] + pairs.shift * tree.domain.side)
        off = np.rint(d / q[:, None]).astype(np.int64)
        return ls, rel, off

    def apply(self, tree, pairs, coeffs, out, chunk=50000):
        """out[leaf(T)] += Gx @ C[leaf(S)] @ Gy.T for every near pair (T, S)."""
        if len(pairs) == 0:
            return out
        ls, rel, off = self.pair_offsets(tree, pairs)
        keys = np.concatenate([np.stack([ls, rel, off[:, 0]], 1), np.stack([ls, rel, off[:, 1]], 1)])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        stack = np.stack([self.gauss1d(*u) for u in uniq])
        n = len(pairs)
        ix, iy = inv[:n], inv[n:]
        tl = tree.leaf_of[pairs.tgt]
        sl = tree.leaf_of[pairs.src]
        order = np.argsort(tl, kind="stable")
        for s in range(0, n, chunk):
            o = order[s:s + chunk]
            contrib = stack[ix[o]] @ coeffs[sl[o]] @ np.swapaxes(stack[iy[o]], 1, 2)
            np.add.at(out, tl[o], contrib)
        return out

    def apply_tdirect(self, tree, pairs, coeffs, p, out):
        """Local-expansion increments out[tgt] from coarse leaf polynomials (one level up).

        ``pairs`` are (target box D, source leaf S, shift) with D one level finer.
        """
        if len(pairs) == 0:
            return out
        ls = tree.level[pairs.src]
        q = tree.side_of(ls) / 4.0
        d = tree.centers[pairs.tgt] - (tree.centers[pairs.src] + pairs.shift * tree.domain.side)
        off = np.rint(d / q[:, None]).astype(np.int64)
        keys = np.concatenate([np.stack([ls, off[:, 0]], 1), np.stack([ls, off[:, 1]], 1)])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        stack = np.stack([self.tdirect(u[0], p, u[1]) for u in uniq])
        n = len(pairs)
        contrib = stack[inv[:n]] @ coeffs[tree.leaf_of[pairs.src]] @ np.swapaxes(stack[inv[n:]], 1, 2)
        np.add.at(out, pairs.tgt, contrib)
        return out

    # ---- serialization
    def dump(self, path, level):
        """Write the 1D tables of one source level as an FGTT file."""
        items = sorted((key, tab) for key, tab in self._g.items() if key[0] == level)
        with open(path, "wb") as fh:
            fh.write(b"FGTT")
            fh.write(struct.pack("<IiId", 1, int(level), self.k, self.delta))
            fh.write(struct.pack("<I", len(items)))
            for (lv, rel, off), tab in items:
                fh.write(struct.pack("<ii", rel, off))
                fh.write(np.ascontiguousarray(tab, dtype="<f8").tobytes())

    def load(self, path):
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != b"FGTT":
            raise ValueError("not an FGTT table file")
        version, level, k, delta = struct.unpack_from("<IiId", data, 4)
        if version != 1 or k != self.k or delta != self.delta:
            raise ValueError("table file does not match this configuration")
        pos = 4 + struct.calcsize("<IiId")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        for _ in range(count):
            rel, off = struct.unpack_from("<ii", data, pos)
            pos += 8
            tab = np.frombuffer(data, dtype="<f8", count=k * k, offset=pos).reshape(k, k).copy()
            pos += 8 * k * k
            tab.flags.writeable = False
            self._g[(level, rel, off)] = tab
        return count


def interpolate_near_field(values, point, center, side):
    """Tensor Chebyshev interpolation of leaf grid values at a point in that leaf."""
    xi = (np.atleast_2d(point) - np.asarray(center)) / (0.5 * side)
    out = basis.interpolate(np.asarray(values), xi)
    return out if np.ndim(point) > 1 else out[0]


def near_points_direct(tree, coeffs, targets, pairs_tgt_pt, pairs_src, shifts, delta, out):
    """Exact near field of leaf polynomials at point targets.

    ``pairs_tgt_pt`` index into ``targets``; ``pairs_src`` are source leaf box ids.
    """
    if len(pairs_src) == 0:
        return out
    k = tree.k
    c = tree.centers[pairs_src] + shifts * tree.domain.side
    h = 0.5 * tree.side_of(tree.level[pairs_src])
    t = targets[pairs_tgt_pt]
    g1 = gauss_poly_integrals_at(t[:, 0], c[:, 0], h, delta, k)
    g2 = gauss_poly_integrals_at(t[:, 1], c[:, 1], h, delta, k)
    vals = np.einsum("ia,iab,ib->i", g1, coeffs[tree.leaf_of[pairs_src]], g2)
    np.add.at(out, pairs_tgt_pt, vals)
    return out
