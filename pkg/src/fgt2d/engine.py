"""Adaptive fast Gauss transform over a level-restricted quad-tree.

The evaluation has three passes:

* upward: Hermite expansions for every box at or below the cutoff level, leaves
  from their sources, parents by merging children;
* downward: local expansions from interaction lists (Hermite-to-local or the
  plane-wave route), parents, and coarse neighbours (the s-list dual); then
  local expansions and s-list Hermite expansions are evaluated at targets;
* near: tabulated integrals for volume sources, exact 1D integrals at point
  targets, direct sums for point sources.

A far-field mechanism between two boxes runs only when the finer of the two
sits at or below the cutoff level; otherwise the boxes are separated by more
than ``r_c * sqrt(delta)`` and the interaction is below tolerance.
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import hermite as H
from . import kernels
from .localtables import NearFieldTables, gauss_poly_integrals_at, interpolate_near_field
from .periodic import lattice_sums, root_local_coeffs
from .quadtree import Domain, Tree, compute_lists, cutoff_level, refine_adaptive

PLANEWAVE_MIN_ORDER = 16
PLANEWAVE_MAX_BYTES = 1 << 29


class InvalidRequest(ValueError):
    pass


@dataclass
class TransformRequest:
    tree: Tree
    delta: float
    eps: float
    boundary_condition: str = "free"
    kernel_prefactor: float = 1.0
    sources: np.ndarray = None
    strengths: np.ndarray = None
    dipoles: np.ndarray = None
    targets: np.ndarray = None
    grid: bool = True
    planewave: object = "auto"
    point_near: str = "direct"
    use_numba: object = None

    def validate(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise InvalidRequest("delta must be positive")
        if not (1e-14 <= self.eps <= 1e-1):
            raise InvalidRequest("eps must lie in [1e-14, 1e-1]")
        if self.boundary_condition not in ("free", "periodic"):
            raise InvalidRequest("boundary_condition must be 'free' or 'periodic'")
        if (self.boundary_condition == "periodic") != self.tree.periodic:
            raise InvalidRequest("tree periodicity does not match boundary_condition")
        if self.kernel_prefactor <= 0:
            raise InvalidRequest("kernel_prefactor must be positive")
        if self.point_near not in ("direct", "interp"):
            raise InvalidRequest("point_near must be 'direct' or 'interp'")


@dataclass
class TransformResult:
    grid_values: np.ndarray
    point_values: np.ndarray
    stats: dict = field(default_factory=dict)


class _Points:
    """Points sorted by containing leaf, with CSR offsets over leaf positions."""

    def __init__(self, tree, xy, values=None, dip=None):
        xy = np.zeros((0, 2)) if xy is None else np.atleast_2d(np.asarray(xy, dtype=float))
        if tree.periodic:
            lo = tree.domain.lower
            xy = lo + np.mod(xy - lo, tree.domain.side)
        leaf = tree.leaf_of[tree.locate(xy)] if len(xy) else np.zeros(0, np.int64)
        self.order = np.argsort(leaf, kind="stable")
        self.x = np.ascontiguousarray(xy[self.order])
        self.off = np.searchsorted(leaf[self.order], np.arange(tree.nleaves + 1)).astype(np.int64)
        n = len(xy)
        self.q = np.zeros(n) if values is None else np.asarray(values, float).reshape(-1)[self.order]
        self.dip = np.zeros((n, 2)) if dip is None else np.atleast_2d(np.asarray(dip, float))[self.order]
        self.n = n

    def unsort(self, v):
        out = np.empty_like(v)
        out[self.order] = v
        return out


class FGT:
    """Precomputed state for repeated transforms on one tree."""

    def __init__(self, tree, delta, eps, kernel_prefactor=1.0, planewave="auto", use_numba=None,
                 tables=None, orders="sharp", prune=True):
        self.tree = tree
        self.delta = float(delta)
        self.eps = float(eps)
        self.gamma = float(kernel_prefactor)
        self.sd = math.sqrt(self.delta)
        self.eps_eff = min(self.eps / self.gamma, 0.5)
        self.use_numba = use_numba
        self.prune = prune
        t0 = time.perf_counter()
        self.L = tree.nlevels
        self.side0 = tree.domain.side
        self.l_cut = cutoff_level(self.L, self.delta, self.eps_eff, self.side0)
        self.lists = compute_lists(tree)
        if orders == "sharp":
            self.plan = H.choose_orders_sharp(self.delta, self.eps_eff, self.L, self.l_cut, self.side0)
        elif orders == "bound":
            self.plan = H.choose_orders(self.delta, self.eps_eff, self.L, self.l_cut, self.side0)
        else:
            raise InvalidRequest("orders must be 'sharp' or 'bound'")
        self.tables = tables or NearFieldTables(self.delta, tree.k, self.side0)
        self._split_lists()
        self.planewave = {}
        for l in range(self.l_cut, self.L + 1):
            p = self.plan.hermite_order[l]
            nb = tree.level_start[l + 1] - tree.level_start[l]
            fits = 2 * nb * self.plan.pw_nodes.get(l, 0) ** 2 * 16 <= PLANEWAVE_MAX_BYTES
            if planewave == "auto":
                self.planewave[l] = p >= PLANEWAVE_MIN_ORDER and fits and len(self.ilist.get(l, ())) > 0
            else:
                self.planewave[l] = bool(planewave)
        self._warm_tables()
        self.precompute_seconds = time.perf_counter() - t0

    # ------------------------------------------------------------ setup ----
    def _within_cutoff(self, pairs):
        """Mask of pairs whose boxes are closer than r_c * sqrt(delta)."""
        tree = self.tree
        if not self.prune:
            return np.ones(len(pairs), bool)
        d = np.abs(tree.centers[pairs.tgt] - (tree.centers[pairs.src] + pairs.shift * self.side0))
        half = 0.5 * (tree.side_of(tree.level[pairs.tgt]) + tree.side_of(tree.level[pairs.src]))
        gap = np.maximum(d - half[:, None], 0.0)
        return (gap ** 2).sum(axis=1) < self.r_cut ** 2

    def _split_lists(self):
        tree, lc = self.tree, self.l_cut
        self.r_cut = H.cutoff_radius(self.eps_eff) * self.sd
        lists = self.lists
        lo = max(lc, 1)
        self.used = {
            "interaction": (tree.level[lists.interaction.tgt] >= lo) & self._within_cutoff(lists.interaction),
            "slist": (tree.level[lists.slist.src] >= lo) & self._within_cutoff(lists.slist),
            "coarse_interaction": ((tree.level[lists.coarse_interaction.tgt] >= lo)
                                   & self._within_cutoff(lists.coarse_interaction)),
        }
        il = lists.interaction
        il = il.select(self._within_cutoff(il))
        self.ilist = {}
        lev = tree.level[il.tgt]
        for l in range(max(lc, 1), self.L + 1):
            self.ilist[l] = il.select(lev == l)
        sl = lists.slist
        sl = sl.select(self._within_cutoff(sl))
        slev = tree.level[sl.src]
        self.slist = {}
        self.coarse = {}
        ci = lists.coarse_interaction
        ci = ci.select(self._within_cutoff(ci))
        clev = tree.level[ci.tgt]
        for l in range(max(lc, 1), self.L + 1):
            self.slist[l] = sl.select(slev == l)
            self.coarse[l] = ci.select(clev == l)

    def _matrix(self, kind, d, p, q):
        """Cached 1D translation matrix (h2h, h2l or l2l) for shift d in units of sqrt(delta)."""
        key = (kind, round(float(d), 12), p, q)
        M = self._mats.get(key)
        if M is None:
            M = {"h2h": H.h2h_matrix, "h2l": H.h2l_matrix, "l2l": H.l2l_matrix}[kind](d, p, q)
            self._mats[key] = M
        return M

    def _ilist_offsets(self, l):
        pairs = self.ilist.get(l)
        if pairs is None or not len(pairs):
            return np.zeros((0, 2), np.int64), np.zeros(0, np.int64)
        d = self.tree.centers[pairs.tgt] - (self.tree.centers[pairs.src] + pairs.shift * self.side0)
        off = np.rint(d / self.tree.side_of(l)).astype(np.int64)
        return off, (off[:, 0] + 8) * 17 + (off[:, 1] + 8)

    def _warm_tables(self):
        tree = self.tree
        self._mats = {}
        self._offsets = {l: self._ilist_offsets(l) for l in self.ilist}
        for l, (off, _) in self._offsets.items():
            if not self.planewave.get(l, False):
                p, q = self.plan.hermite_order[l], self.plan.local_order[l]
                for o in np.unique(off):
                    self._matrix("h2l", o * tree.side_of(l) / self.sd, p, q)
        if tree.periodic and self.l_cut == 0:
            self._lattice = lattice_sums(self.delta, self.plan.hermite_order[0] + self.plan.local_order[0])
        self._pw = {}
        for l, on in self.planewave.items():
            if on:
                nodes, step = H.planewave_nodes(tree.side_of(l) / self.sd, self.eps_eff)
                p, q = self.plan.hermite_order[l], self.plan.local_order[l]
                self._pw[l] = (nodes, step, H.pw_from_hermite_matrix(nodes, p), H.pw_to_local_matrix(nodes, step, q))
        self._moments = {}
        if tree.values is None:
            return
        near = self.lists.near
        if len(near):
            ls, rel, off = self.tables.pair_offsets(tree, near)
            keys = np.unique(np.concatenate([np.stack([ls, rel, off[:, 0]], 1),
                                             np.stack([ls, rel, off[:, 1]], 1)]), axis=0)
            for kk in keys:
                self.tables.gauss1d(*kk)
        for l in range(self.l_cut, self.L + 1):
            if tree.is_leaf[tree.boxes_at(l)].any():
                self._moments[l] = H.moment_matrix(tree.side_of(l), self.sd, self.plan.hermite_order[l], tree.k)
        for l, pairs in self.coarse.items():
            if len(pairs):
                q = self.plan.local_order[l]
                ls = tree.level[pairs.src]
                d = tree.centers[pairs.tgt] - (tree.centers[pairs.src] + pairs.shift * self.side0)
                off = np.rint(d / (tree.side_of(ls) / 4.0)[:, None]).astype(np.int64)
                for lv, o in set(zip(np.r_[ls, ls].tolist(), np.r_[off[:, 0], off[:, 1]].tolist())):
                    self.tables.tdirect(lv, q, o)

    def audit_coverage(self):
        """Check that every (target leaf, source leaf, image) pair is handled exactly once.

        Each pair must appear in exactly one of the near list, the interaction
        list, the s-list or the coarse interaction list (through ancestors).
        Pairs in a list the engine skips must be separated by at least
        r_c * sqrt(delta).  Free space uses the identity image only; periodic
        trees use the 3 x 3 block of images (farther tiles go through the
        lattice sums or are beyond the cutoff).
        """
        tree, lists = self.tree, self.lists
        below = [[] for _ in range(tree.nboxes)]
        for b in tree.leaves:
            a = b
            while a >= 0:
                below[a].append(b)
                a = tree.parent[a]
        seen = {}
        unproven = 0
        named = [("near", lists.near, np.ones(len(lists.near), bool))]
        named += [(n, getattr(lists, n), self.used[n]) for n in ("interaction", "slist", "coarse_interaction")]
        for name, pl, used in named:
            if not len(pl):
                continue
            skipped = ~used
            if skipped.any():
                d = np.abs(tree.centers[pl.tgt] - (tree.centers[pl.src] + pl.shift * self.side0))
                half = 0.5 * (tree.side_of(tree.level[pl.tgt]) + tree.side_of(tree.level[pl.src]))
                gap2 = (np.maximum(d - half[:, None], 0.0) ** 2).sum(axis=1)
                unproven += int((skipped & (gap2 < self.r_cut ** 2 * (1 - 1e-12))).sum())
            for t, s_, (a, b), u in zip(pl.tgt.tolist(), pl.src.tolist(), pl.shift.tolist(), used.tolist()):
                tag = name if u else "discarded"
                for tl in below[t]:
                    for sl in below[s_]:
                        seen.setdefault((tl, sl, a, b), []).append(tag)
        shifts = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)] if tree.periodic else [(0, 0)]
        missing = 0
        for tl in tree.leaves.tolist():
            for sl in tree.leaves.tolist():
                for a, b in shifts:
                    if (tl, sl, a, b) not in seen:
                        missing += 1
        counts = {}
        for tags in seen.values():
            for t in tags:
                counts[t] = counts.get(t, 0) + 1
        duplicates = sum(1 for tags in seen.values() if len(tags) > 1)
        return {"pairs": len(seen), "missing": missing, "duplicates": duplicates, "unproven_discards": unproven,
                "by_mechanism": counts,
                "ok": missing == 0 and duplicates == 0 and unproven == 0}

    # ------------------------------------------------------------- run ----
    def run(self, sources=None, strengths=None, dipoles=None, targets=None, grid=True, volume=True,
            point_near="direct"):
        tree = self.tree
        stats = {"l_cut": self.l_cut, "levels": self.L, "plan": self.plan.as_dict(),
                 "planewave_levels": [l for l, on in self.planewave.items() if on],
                 "precompute_seconds": self.precompute_seconds}
        timings = {}
        t0 = time.perf_counter()
        src = _Points(tree, sources, strengths, dipoles)
        tgt = _Points(tree, targets)
        coeffs = tree.coeffs if (volume and tree.values is not None) else None
        k = tree.k
        tsets = []
        if grid:
            gx = tree.grid_points().reshape(-1, 2)
            g_off = (np.arange(tree.nleaves + 1) * k * k).astype(np.int64)
            tsets.append(("grid", gx, g_off, np.zeros(len(gx))))
        if tgt.n:
            tsets.append(("points", tgt.x, tgt.off, np.zeros(tgt.n)))
        timings["setup"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        A = self._upward(coeffs, src)
        timings["upward"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        Psi = self._downward(A, coeffs, src)
        timings["downward"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        for _, tx, toff, out in tsets:
            self._evaluate_far(A, Psi, tx, toff, out)
        timings["evaluate"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        near_grid = None
        for name, tx, toff, out in tsets:
            if name == "grid" and coeffs is not None:
                near_grid = np.zeros((tree.nleaves, k, k))
                self.tables.apply(tree, self.lists.near, coeffs, near_grid)
                out += near_grid.reshape(-1)
            if name == "points" and coeffs is not None:
                if point_near == "interp":
                    if near_grid is None:
                        near_grid = np.zeros((tree.nleaves, k, k))
                        self.tables.apply(tree, self.lists.near, coeffs, near_grid)
                    self._near_points_interp(near_grid, tx, toff, out)
                else:
                    self._near_points_direct(coeffs, tx, toff, out)
            if src.n:
                self._near_point_sources(src, tx, toff, out)
        timings["near"] = time.perf_counter() - t0
        grid_values = None
        point_values = np.zeros(0)
        for name, tx, toff, out in tsets:
            if name == "grid":
                grid_values = self.gamma * out.reshape(tree.nleaves, k, k)
            else:
                point_values = self.gamma * tgt.unsort(out)
        stats["timings"] = timings
        stats["eval_seconds"] = sum(timings.values())
        stats["n_expansions"] = int(sum(len(a) for a in A.values()))
        return TransformResult(grid_values, point_values, stats)

    # ---------------------------------------------------------- passes ----
    def _level_slice(self, l):
        return self.tree.level_start[l], self.tree.level_start[l + 1]

    def _upward(self, coeffs, src):
        tree, sd = self.tree, self.sd
        A = {}
        for l in range(self.L, self.l_cut - 1, -1):
            s0, s1 = self._level_slice(l)
            p = self.plan.hermite_order[l]
            Al = np.zeros((s1 - s0, p, p))
            ids = np.arange(s0, s1)
            leaf = tree.is_leaf[ids]
            if leaf.any():
                lid = ids[leaf]
                if coeffs is not None:
                    M = self._moments[l]
                    Al[leaf] += M @ coeffs[tree.leaf_of[lid]] @ M.T
                if src.n:
                    a, b = tree.leaf_of[lid[0]], tree.leaf_of[lid[-1]] + 1
                    Al[leaf] += kernels.p2h(src.x, src.q, src.dip, src.off[a:b + 1], tree.centers[lid], sd, p,
                                            use_numba=self.use_numba)
            if l < self.L and (~leaf).any():
                pid = ids[~leaf]
                pc = self.plan.hermite_order[l + 1]
                c0 = tree.level_start[l + 1]
                for slot in range(4):
                    ch = tree.children[pid, slot]
                    d = (tree.centers[ch[0]] - tree.centers[pid[0]]) / sd
                    S1 = self._matrix("h2h", d[0], pc, p)
                    S2 = self._matrix("h2h", d[1], pc, p)
                    Al[~leaf] += S1 @ A[l + 1][ch - c0] @ S2.T
            A[l] = Al
        return A

    def _translate_ilist(self, l, Al, Psi_l):
        tree, sd = self.tree, self.sd
        pairs = self.ilist.get(l)
        if pairs is None or not len(pairs):
            return
        s0 = tree.level_start[l]
        side = tree.side_of(l)
        off, keys = self._offsets[l]
        p, q = self.plan.hermite_order[l], self.plan.local_order[l]
        groups = np.unique(keys)
        if self.planewave.get(l, False):
            nodes, step, Mh, Ml = self._pw[l]
            W = Mh @ Al.astype(complex) @ Mh.T  # (n, pt, pt)
            acc = np.zeros_like(W)
            for g in groups:
                m = keys == g
                o = off[m][0]
                # diagonal shift by (target - source centre) / sqrt(delta)
                e1 = np.exp(1j * nodes * (o[0] * side / sd))
                e2 = np.exp(1j * nodes * (o[1] * side / sd))
                np.add.at(acc, pairs.tgt[m] - s0, W[pairs.src[m] - s0] * e1[:, None] * e2[None, :])
            Psi_l += (Ml @ acc @ Ml.T).real
            return
        for g in groups:
            m = keys == g
            o = off[m][0]
            # d passed to h2l_matrix is (t_C - s_B)/sqrt(delta)
            H1 = self._matrix("h2l", o[0] * side / sd, p, q)
            H2 = self._matrix("h2l", o[1] * side / sd, p, q)
            np.add.at(Psi_l, pairs.tgt[m] - s0, H1 @ Al[pairs.src[m] - s0] @ H2.T)

    def _downward(self, A, coeffs, src):
        tree, sd = self.tree, self.sd
        Psi = {}
        for l in range(self.l_cut, self.L + 1):
            s0, s1 = self._level_slice(l)
            q = self.plan.local_order[l]
            Pl = np.zeros((s1 - s0, q, q))
            if l > self.l_cut:
                qp = self.plan.local_order[l - 1]
                ps0 = tree.level_start[l - 1]
                ids = np.arange(s0, s1)
                par = tree.parent[ids]
                slot = (tree.ix[ids] & 1) + 2 * (tree.iy[ids] & 1)
                for sl in range(4):
                    m = slot == sl
                    if not m.any():
                        continue
                    c = ids[m][0]
                    d = (tree.centers[c] - tree.centers[par[m][0]]) / sd
                    L1 = self._matrix("l2l", d[0], qp, q)
                    L2 = self._matrix("l2l", d[1], qp, q)
                    Pl[m] += L1 @ Psi[l - 1][par[m] - ps0] @ L2.T
            elif l == 0 and tree.periodic:
                Pl[0] += root_local_coeffs(A[0][0], self._lattice, q)
            self._translate_ilist(l, A[l], Pl)
            pairs = self.coarse.get(l)
            if pairs is not None and len(pairs):
                if coeffs is not None:
                    self._apply_tdirect(pairs, coeffs, q, Pl, s0)
                if src.n:
                    ps = tree.leaf_of[pairs.src]
                    kernels.p2l(src.x, src.q, src.dip, src.off, ps, pairs.tgt - s0, pairs.shift * self.side0,
                                tree.centers[s0:s1], sd, q, Pl, use_numba=self.use_numba)
            Psi[l] = Pl
        return Psi

    def _apply_tdirect(self, pairs, coeffs, q, out, s0):
        tree = self.tree
        ls = tree.level[pairs.src]
        d = tree.centers[pairs.tgt] - (tree.centers[pairs.src] + pairs.shift * self.side0)
        off = np.rint(d / (tree.side_of(ls) / 4.0)[:, None]).astype(np.int64)
        keys = np.concatenate([np.stack([ls, off[:, 0]], 1), np.stack([ls, off[:, 1]], 1)])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        stack = np.stack([self.tables.tdirect(a, q, b) for a, b in uniq])
        n = len(pairs)
        contrib = stack[inv[:n]] @ coeffs[tree.leaf_of[pairs.src]] @ np.swapaxes(stack[inv[n:]], 1, 2)
        np.add.at(out, pairs.tgt - s0, contrib)

    def _evaluate_far(self, A, Psi, tx, toff, out):
        tree, sd = self.tree, self.sd
        for l in range(self.l_cut, self.L + 1):
            s0, s1 = self._level_slice(l)
            ids = np.arange(s0, s1)
            lid = ids[tree.is_leaf[ids]]
            if len(lid):
                a, b = tree.leaf_of[lid[0]], tree.leaf_of[lid[-1]] + 1
                kernels.l2p(tx, toff[a:b + 1], Psi[l][lid - s0], tree.centers[lid], sd, out,
                            use_numba=self.use_numba)
        for l, pairs in self.slist.items():
            if not len(pairs):
                continue
            s0 = tree.level_start[l]
            kernels.h2p(tx, toff, tree.leaf_of[pairs.tgt], pairs.src - s0, pairs.shift * self.side0, A[l],
                        tree.centers[s0:tree.level_start[l + 1]], sd, out, use_numba=self.use_numba)

    def _expand_near(self, toff):
        """(target index, source leaf box, shift) for every point target and each near leaf."""
        near = self.lists.near
        tl = self.tree.leaf_of[near.tgt]
        cnt = toff[tl + 1] - toff[tl]
        rep = np.repeat(np.arange(len(near)), cnt)
        start = np.repeat(toff[tl], cnt)
        first = np.repeat(np.cumsum(cnt) - cnt, cnt)
        idx = start + np.arange(len(rep)) - first
        return idx, near.src[rep], near.shift[rep]

    def _near_points_direct(self, coeffs, tx, toff, out):
        tree = self.tree
        idx, sbox, shift = self._expand_near(toff)
        if not len(idx):
            return
        c = tree.centers[sbox] + shift * self.side0
        h = 0.5 * tree.side_of(tree.level[sbox])
        g1 = gauss_poly_integrals_at(tx[idx, 0], c[:, 0], h, self.delta, tree.k)
        g2 = gauss_poly_integrals_at(tx[idx, 1], c[:, 1], h, self.delta, tree.k)
        vals = np.einsum("ia,iab,ib->i", g1, coeffs[tree.leaf_of[sbox]], g2)
        np.add.at(out, idx, vals)

    def _near_points_interp(self, near_grid, tx, toff, out):
        tree = self.tree
        for j, b in enumerate(tree.leaves):
            t0, t1 = toff[j], toff[j + 1]
            if t0 < t1:
                out[t0:t1] += interpolate_near_field(near_grid[j], tx[t0:t1], tree.centers[b],
                                                     tree.side_of(tree.level[b]))

    def _near_point_sources(self, src, tx, toff, out):
        near = self.lists.near
        kernels.p2p(tx, toff, src.x, src.q, src.dip, src.off, self.tree.leaf_of[near.tgt],
                    self.tree.leaf_of[near.src], near.shift * self.side0, self.delta, out,
                    use_numba=self.use_numba)


# ---------------------------------------------------------- entry points ----

def run(request):
    """Evaluate a :class:`TransformRequest`."""
    request.validate()
    fgt = FGT(request.tree, request.delta, request.eps, request.kernel_prefactor, request.planewave,
              request.use_numba)
    return fgt.run(request.sources, request.strengths, request.dipoles, request.targets,
                   grid=request.grid, point_near=request.point_near)


def volume_transform(tree, delta, eps, targets=None, grid=True, **kw):
    bc = "periodic" if tree.periodic else "free"
    return run(TransformRequest(tree=tree, delta=delta, eps=eps, boundary_condition=bc, targets=targets,
                                grid=grid, **kw))


def points_domain(*arrays, pad=1e-9):
    """Smallest square domain containing all given points."""
    pts = np.concatenate([np.atleast_2d(a) for a in arrays if a is not None and len(a)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float((hi - lo).max()) * (1 + 2 * pad) + pad
    return Domain(tuple(((lo + hi) / 2).tolist()), side)


def discrete_transform(sources, strengths, targets, delta, eps, dipoles=None, domain=None, periodic=False,
                       q=64, max_levels=20, kernel_prefactor=1.0, use_numba=None, planewave="auto"):
    """Discrete Gauss transform sum_j q_j exp(-|t - y_j|^2 / delta) (+ dipoles) at targets."""
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if domain is None:
        domain = Domain((0.5, 0.5), 1.0) if periodic else points_domain(sources, targets)
    tree = refine_adaptive(None, 1.0, k=1, max_levels=max_levels, domain=domain, periodic=periodic,
                           points=np.concatenate([sources, targets]), q=q)
    req = TransformRequest(tree=tree, delta=delta, eps=eps, boundary_condition="periodic" if periodic else "free",
                           kernel_prefactor=kernel_prefactor, sources=sources, strengths=strengths,
                           dipoles=dipoles, targets=targets, grid=False, use_numba=use_numba,
                           planewave=planewave)
    return run(req)
