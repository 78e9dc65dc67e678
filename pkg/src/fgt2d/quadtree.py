"""Level-restricted adaptive quad-trees and their box lists.

Boxes are addressed by ``(level, ix, iy)`` integer cells; within a level a box
index is ``iy * 2**level + ix``.  Box ids in a built :class:`Tree` are sorted by
``(level, index)`` so each level is a contiguous, searchable slice.

Lists are stored as pair arrays ``(tgt, src, shift)``.  ``shift`` is an integer
image offset in units of the domain side: the source is seen from the target at
``position(src) + shift * side``.  Free-space lists always have zero shift.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from . import basis


class RefinementError(RuntimeError):
    """Refinement stopped at the level cap before the tolerance was met."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Domain:
    center: tuple = (0.5, 0.5)
    side: float = 1.0

    @property
    def lower(self):
        return np.asarray(self.center, dtype=float) - 0.5 * self.side

    def box_side(self, level):
        return self.side * 0.5 ** level


UNIT = Domain()


def cutoff_radius(eps):
    return math.sqrt(math.log(1.0 / eps))


def cutoff_level(levels, delta, eps, side0=1.0):
    """Coarsest level whose box side is at most r_c*sqrt(delta); levels+1 if none."""
    reach = cutoff_radius(eps) * math.sqrt(delta)
    for l in range(levels + 1):
        if side0 * 0.5 ** l <= reach:
            return l
    return levels + 1


def project_leaf(samples, k):
    """Coefficient vector of length k(k+1)/2 (total degree < k, lexicographic)."""
    C = basis.samples_to_coeffs(samples, k)
    return np.array([C[a, b] for a, b in basis.triangle_index(k)])


def tail_residual(samples):
    """Largest Chebyshev coefficient in the last row and column (degree k-1 in either variable), per leaf."""
    k = samples.shape[-1]
    C = basis.full_cheb_coeffs(samples)
    n = np.arange(k)
    band = np.maximum(n[:, None], n[None, :]) == k - 1
    return np.abs(C[..., band]).max(axis=-1)


# ------------------------------------------------------------ leaf sets ----

def _children(cell):
    l, x, y = cell
    return [(l + 1, 2 * x + a, 2 * y + b) for b in (0, 1) for a in (0, 1)]


def _covering_leaf(leaves, l, x, y):
    while l >= 0:
        if (l, x, y) in leaves:
            return (l, x, y)
        l, x, y = l - 1, x >> 1, y >> 1
    return None


def balance_leaves(leaves, periodic=False):
    """Subdivide leaves until adjacent leaves differ by at most one level.

    Works finest level first; only subdivisions are performed.
    """
    leaves = set(leaves)
    if not leaves:
        return leaves
    top = max(l for l, _, _ in leaves)
    for l in range(top, 1, -1):
        work = [c for c in leaves if c[0] == l]
        for (_, x, y) in work:
            n = 1 << l
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    cx, cy = x + dx, y + dy
                    if periodic:
                        cx %= n
                        cy %= n
                    elif not (0 <= cx < n and 0 <= cy < n):
                        continue
                    while True:
                        cov = _covering_leaf(leaves, l, cx, cy)
                        if cov is None or cov[0] >= l - 1:
                            break
                        leaves.remove(cov)
                        leaves.update(_children(cov))
    return leaves


def is_balanced(leaves, periodic=False):
    """Exhaustive pairwise check that touching leaves differ by at most one level."""
    cells = list(leaves)
    if not cells:
        return True
    L = max(c[0] for c in cells)
    n = 1 << L
    lo = np.array([[x << (L - l), y << (L - l)] for l, x, y in cells])
    ext = np.array([1 << (L - l) for l, _, _ in cells])
    lev = np.array([c[0] for c in cells])
    shifts = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)] if periodic else [(0, 0)]
    for i in range(len(cells)):
        for a, b in shifts:
            x0 = lo[:, 0] + a * n
            y0 = lo[:, 1] + b * n
            touch_x = (x0 <= lo[i, 0] + ext[i]) & (x0 + ext >= lo[i, 0])
            touch_y = (y0 <= lo[i, 1] + ext[i]) & (y0 + ext >= lo[i, 1])
            bad = touch_x & touch_y & (np.abs(lev - lev[i]) > 1)
            if bad.any():
                return False
    return True


# ----------------------------------------------------------------- tree ----

class Tree:
    """Immutable quad-tree over a square domain with optional leaf samples.

    Attributes of note: ``level, ix, iy, parent, children, is_leaf`` (per box),
    ``leaves`` (box ids of leaves, ascending), ``leaf_of`` (box id -> leaf
    position or -1) and ``values`` (per-leaf k-by-k samples on the Chebyshev
    grid, ``values[i, a, b] = f(x_a, y_b)``).
    """

    def __init__(self, leaves, k=8, domain=UNIT, periodic=False, values=None):
        leaves = set(leaves)
        if not leaves:
            leaves = {(0, 0, 0)}
        cells = set(leaves)
        for c in leaves:
            l, x, y = c
            while l > 0:
                l, x, y = l - 1, x >> 1, y >> 1
                cells.add((l, x, y))
        order = sorted(cells, key=lambda c: (c[0], c[2] * (1 << c[0]) + c[1]))
        self.k = int(k)
        self.domain = domain
        self.periodic = bool(periodic)
        if self.periodic and (domain.side != 1.0):
            raise ValueError("periodic trees require a unit-side domain")
        self.level = np.array([c[0] for c in order], dtype=np.int64)
        self.ix = np.array([c[1] for c in order], dtype=np.int64)
        self.iy = np.array([c[2] for c in order], dtype=np.int64)
        self.nlevels = int(self.level.max())
        self.level_start = np.searchsorted(self.level, np.arange(self.nlevels + 2))
        self.key = self.iy * (1 << self.level) + self.ix
        nb = len(order)
        self.is_leaf = np.array([c in leaves for c in order])
        self.parent = np.full(nb, -1, dtype=np.int64)
        self.parent[1:] = self.find(self.level[1:] - 1, self.ix[1:] >> 1, self.iy[1:] >> 1)
        self.children = np.full((nb, 4), -1, dtype=np.int64)
        nonroot = np.arange(1, nb)
        slot = (self.ix[1:] & 1) + 2 * (self.iy[1:] & 1)
        self.children[self.parent[1:], slot] = nonroot
        internal = ~self.is_leaf
        if (self.children[internal] < 0).any():
            raise ValueError("leaf set does not tile the domain")
        for c in leaves:
            if any(ch in cells for ch in _children(c)):
                raise ValueError("leaf set does not tile the domain")
        self.leaves = np.flatnonzero(self.is_leaf)
        self.leaf_of = np.full(nb, -1, dtype=np.int64)
        self.leaf_of[self.leaves] = np.arange(len(self.leaves))
        h = self.side_of(self.level)
        lo = self.domain.lower
        self.centers = np.stack([lo[0] + (self.ix + 0.5) * h, lo[1] + (self.iy + 0.5) * h], axis=1)
        self.values = None
        self._coeffs = None
        if values is not None:
            self.set_values(values)

    # ---- geometry
    @property
    def nboxes(self):
        return len(self.level)

    @property
    def nleaves(self):
        return len(self.leaves)

    def side_of(self, level):
        return self.domain.side * 0.5 ** np.asarray(level, dtype=float)

    def boxes_at(self, l):
        return np.arange(self.level_start[l], self.level_start[l + 1])

    def cells(self, ids=None):
        ids = self.leaves if ids is None else ids
        return [(int(self.level[i]), int(self.ix[i]), int(self.iy[i])) for i in ids]

    def find(self, level, ix, iy):
        """Box ids for cells (vectorized); -1 where the cell is not in the tree."""
        level = np.asarray(level, dtype=np.int64)
        ix = np.asarray(ix, dtype=np.int64)
        iy = np.asarray(iy, dtype=np.int64)
        out = np.full(np.broadcast(level, ix, iy).shape, -1, dtype=np.int64)
        level, ix, iy = np.broadcast_arrays(level, ix, iy)
        for l in np.unique(level):
            if l < 0 or l > self.nlevels:
                continue
            m = level == l
            n = 1 << int(l)
            x, y = ix[m], iy[m]
            ok = (x >= 0) & (x < n) & (y >= 0) & (y < n)
            key = np.where(ok, y * n + x, -1)
            s0, s1 = self.level_start[l], self.level_start[l + 1]
            keys = self.key[s0:s1]
            pos = np.clip(np.searchsorted(keys, key), 0, len(keys) - 1)
            hit = ok & (keys[pos] == key)
            out[m] = np.where(hit, s0 + pos, -1)
        return out

    def grid_points(self, ids=None):
        """Chebyshev grid points of leaves, shape (n, k*k, 2), row-major in (a, b)."""
        ids = self.leaves if ids is None else ids
        x = basis.cheb_nodes(self.k)
        h = 0.5 * self.side_of(self.level[ids])
        c = self.centers[ids]
        X = c[:, None, 0] + h[:, None] * x[None, :]
        Y = c[:, None, 1] + h[:, None] * x[None, :]
        k = self.k
        return np.stack([np.repeat(X, k, axis=1), np.tile(Y, (1, k))], axis=2)

    def locate(self, points):
        """Leaf box id containing each point (points on shared edges go up/right)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        u = (p - self.domain.lower) / self.domain.side
        if self.periodic:
            u = u - np.floor(u)
        if ((u < 0) | (u > 1)).any():
            raise ValueError("point outside the domain")
        out = np.zeros(len(p), dtype=np.int64)
        active = np.arange(len(p))
        for l in range(self.nlevels + 1):
            n = 1 << l
            cx = np.minimum((u[active, 0] * n).astype(np.int64), n - 1)
            cy = np.minimum((u[active, 1] * n).astype(np.int64), n - 1)
            ids = self.find(l, cx, cy)
            out[active] = ids
            leaf = self.is_leaf[ids]
            active = active[~leaf]
            if len(active) == 0:
                break
        return out

    # ---- leaf data
    def set_values(self, values):
        v = np.asarray(values, dtype=float).reshape(self.nleaves, self.k, self.k)
        self.values = v
        self._coeffs = None

    def sample(self, f):
        """Sample a vectorized function f(x, y) on every leaf grid."""
        g = self.grid_points()
        self.set_values(np.asarray(f(g[..., 0], g[..., 1]), dtype=float))
        return self

    @property
    def coeffs(self):
        """Per-leaf (k, k) coefficient matrices of the leaf polynomials."""
        if self._coeffs is None:
            if self.values is None:
                return None
            self._coeffs = basis.samples_to_coeffs(self.values, self.k)
        return self._coeffs

    # ---- serialization
    def to_json(self):
        return {
            "domain": {"center": list(map(float, self.domain.center)), "side": float(self.domain.side)},
            "k": self.k,
            "periodic": self.periodic,
            "boxes": [
                {"level": int(self.level[i]), "index": int(self.key[i]),
                 "center": self.centers[i].tolist(), "is_leaf": bool(self.is_leaf[i])}
                for i in range(self.nboxes)
            ],
            "leaf_values": [] if self.values is None else self.values.reshape(self.nleaves, -1).tolist(),
        }

    @classmethod
    def from_json(cls, data, periodic=None):
        if isinstance(data, str):
            data = json.loads(data)
        dom = data.get("domain", {})
        domain = Domain(tuple(dom.get("center", (0.5, 0.5))), float(dom.get("side", 1.0)))
        k = int(data["k"])
        leaves = []
        for b in data["boxes"]:
            if b["is_leaf"]:
                l, idx = int(b["level"]), int(b["index"])
                leaves.append((l, idx % (1 << l), idx // (1 << l)))
        per = data.get("periodic", False) if periodic is None else periodic
        tree = cls(leaves, k=k, domain=domain, periodic=per)
        vals = data.get("leaf_values") or None
        if vals is not None:
            # leaf_values follow the order of leaf boxes in the file
            file_order = [(int(b["level"]), int(b["index"])) for b in data["boxes"] if b["is_leaf"]]
            pos = {(int(tree.level[i]), int(tree.key[i])): j for j, i in enumerate(tree.leaves)}
            arr = np.zeros((tree.nleaves, k * k))
            for row, key in zip(vals, file_order):
                arr[pos[key]] = row
            tree.set_values(arr)
        return tree


# ------------------------------------------------------------- builders ----

def build_uniform_tree(levels, k=8, domain=UNIT, periodic=False):
    n = 1 << levels
    return Tree([(levels, x, y) for y in range(n) for x in range(n)], k=k, domain=domain, periodic=periodic)


def _grid_for_cells(cells, k, domain):
    x = basis.cheb_nodes(k)
    lo = domain.lower
    out = np.empty((len(cells), k, k, 2))
    for i, (l, cx, cy) in enumerate(cells):
        h = domain.side * 0.5 ** l
        X = lo[0] + (cx + 0.5 + 0.5 * x) * h
        Y = lo[1] + (cy + 0.5 + 0.5 * x) * h
        out[i, :, :, 0] = X[:, None]
        out[i, :, :, 1] = Y[None, :]
    return out


def refine_adaptive(f, tol, k=8, max_levels=12, domain=UNIT, periodic=False, min_level=0,
                    points=None, q=64):
    """Adaptive level-restricted tree resolving ``f`` and/or holding <= q points per leaf.

    ``f(x, y)`` is vectorized.  A leaf is accepted when its Chebyshev tail
    (degree k-1 in either variable) is at most ``tol`` times the largest sample
    magnitude seen.  Raises :class:`RefinementError` at the level cap.
    """
    if f is not None and tol <= 0:
        raise ValueError("tol must be positive")
    leaves = set()
    active = [(0, 0, 0)]
    fmax = 0.0
    pts = None
    if points is not None:
        pts = (np.atleast_2d(np.asarray(points, dtype=float)) - domain.lower) / domain.side
        if periodic:
            pts = pts - np.floor(pts)
    worst = 0.0
    while active:
        split = np.zeros(len(active), dtype=bool)
        lev = np.array([c[0] for c in active])
        split |= lev < min_level
        if f is not None:
            g = _grid_for_cells(active, k, domain)
            s = np.asarray(f(g[..., 0], g[..., 1]), dtype=float)
            fmax = max(fmax, float(np.abs(s).max()))
            res = tail_residual(s)
            split |= res > tol * max(fmax, np.finfo(float).tiny)
        if pts is not None:
            for i, (l, cx, cy) in enumerate(active):
                n = 1 << l
                inside = ((pts[:, 0] * n >= cx) & (pts[:, 0] * n < cx + 1) |
                          ((cx == n - 1) & (pts[:, 0] == 1.0)))
                inside &= ((pts[:, 1] * n >= cy) & (pts[:, 1] * n < cy + 1) |
                           ((cy == n - 1) & (pts[:, 1] == 1.0)))
                if inside.sum() > q:
                    split[i] = True
        nxt = []
        for i, c in enumerate(active):
            if split[i] and c[0] >= max_levels:
                if f is not None:
                    worst = max(worst, float(res[i]) / max(fmax, np.finfo(float).tiny))
                leaves.add(c)
            elif split[i]:
                nxt.extend(_children(c))
            else:
                leaves.add(c)
        active = nxt
    if worst > tol:
        raise RefinementError(f"refinement cap {max_levels} reached; worst relative tail {worst:.3e}", worst)
    tree = Tree(balance_leaves(leaves, periodic), k=k, domain=domain, periodic=periodic)
    if f is not None:
        tree.sample(f)
    return tree


def enforce_level_restriction(tree):
    leaves = balance_leaves(tree.cells(), tree.periodic)
    if len(leaves) == tree.nleaves:
        return tree
    out = Tree(leaves, k=tree.k, domain=tree.domain, periodic=tree.periodic)
    return out


# ---------------------------------------------------------------- lists ----

@dataclass
class PairList:
    tgt: np.ndarray
    src: np.ndarray
    shift: np.ndarray

    def __len__(self):
        return len(self.tgt)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 2), np.int64))

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(np.concatenate([p.tgt for p in parts]), np.concatenate([p.src for p in parts]),
                   np.concatenate([p.shift for p in parts]))

    def reversed(self):
        return PairList(self.src.copy(), self.tgt.copy(), -self.shift)

    def select(self, mask):
        return PairList(self.tgt[mask], self.src[mask], self.shift[mask])

    def as_set(self):
        return {(int(t), int(s), int(a), int(b)) for t, s, (a, b) in zip(self.tgt, self.src, self.shift)}


@dataclass
class BoxLists:
    colleagues: PairList
    interaction: PairList
    near: PairList
    near_kind: np.ndarray  # -1 coarse source, 0 same level, +1 fine source
    slist: PairList
    coarse_interaction: PairList

    def for_box(self, b, name):
        pl = getattr(self, name)
        m = pl.tgt == b
        return list(zip(pl.src[m].tolist(), map(tuple, pl.shift[m].tolist())))


def _unique_pairs(pl):
    if not len(pl):
        return pl
    arr = np.column_stack([pl.tgt, pl.src, pl.shift])
    arr = np.unique(arr, axis=0)
    return PairList(arr[:, 0], arr[:, 1], arr[:, 2:4])


def compute_lists(tree):
    """All box relationships of a balanced tree (wrapped when ``tree.periodic``)."""
    col_parts, ilist_parts, near_parts, kinds, s_parts = [], [], [], [], []
    for l in range(tree.nlevels + 1):
        ids = tree.boxes_at(l)
        col = _resolve(tree, l, [(ids, tree.ix[ids] + dx, tree.iy[ids] + dy)
                                 for dy in (-1, 0, 1) for dx in (-1, 0, 1)])
        col_parts.append(col)
        if l >= 1:
            # children of the parent's colleagues, minus the 3x3 block around the box
            offs = []
            for py in (-1, 0, 1):
                for px in (-1, 0, 1):
                    for b in (0, 1):
                        for a in (0, 1):
                            offs.append((px, py, a, b))
            cand = []
            for px, py, a, b in offs:
                cx = 2 * ((tree.ix[ids] >> 1) + px) + a
                cy = 2 * ((tree.iy[ids] >> 1) + py) + b
                far = (np.abs(cx - tree.ix[ids]) > 1) | (np.abs(cy - tree.iy[ids]) > 1)
                cand.append((ids[far], cx[far], cy[far]))
            ilist_parts.append(_resolve(tree, l, cand))
        leaf_ids = ids[tree.is_leaf[ids]]
        if len(leaf_ids) == 0:
            continue
        # same-level leaf neighbours (including self)
        same_leaf = col.select(tree.is_leaf[col.src] & tree.is_leaf[col.tgt])
        near_parts.append(same_leaf)
        kinds.append(np.zeros(len(same_leaf), dtype=np.int64))
        # coarse neighbours at level l-1
        if l >= 1:
            cand = []
            for d in (-1, 0, 1):
                for e in (-1, 0, 1):
                    cx = (tree.ix[leaf_ids] >> 1) + d
                    cy = (tree.iy[leaf_ids] >> 1) + e
                    adj = ((2 * cx <= tree.ix[leaf_ids] + 1) & (2 * cx + 2 >= tree.ix[leaf_ids]) &
                           (2 * cy <= tree.iy[leaf_ids] + 1) & (2 * cy + 2 >= tree.iy[leaf_ids]))
                    adj &= not (d == 0 and e == 0)
                    cand.append((leaf_ids[adj], cx[adj], cy[adj]))
            pl = _resolve(tree, l - 1, cand)
            pl = pl.select(tree.is_leaf[pl.src])
            near_parts.append(pl)
            kinds.append(np.full(len(pl), -1, dtype=np.int64))
        if l < tree.nlevels:
            fine, sl = [], []
            for b in range(-2, 4):
                for a in range(-2, 4):
                    cx = 2 * tree.ix[leaf_ids] + a
                    cy = 2 * tree.iy[leaf_ids] + b
                    inner = (-1 <= a <= 2) and (-1 <= b <= 2)
                    child = (a in (0, 1)) and (b in (0, 1))
                    if child:
                        continue
                    (fine if inner else sl).append((leaf_ids, cx, cy))
            pl = _resolve(tree, l + 1, fine)
            pl = pl.select(tree.is_leaf[pl.src])
            near_parts.append(pl)
            kinds.append(np.ones(len(pl), dtype=np.int64))
            # s-list: only below existing same-level colleagues
            spl = _resolve(tree, l + 1, sl)
            s_parts.append(spl)
    slist = PairList.concat(s_parts)
    return BoxLists(
        colleagues=PairList.concat(col_parts),
        interaction=PairList.concat(ilist_parts),
        near=PairList.concat(near_parts),
        near_kind=np.concatenate(kinds) if kinds else np.zeros(0, np.int64),
        slist=slist,
        coarse_interaction=slist.reversed(),
    )


def _resolve(tree, level, cand):
    """Look up candidate cells (tgt ids, cx, cy) at ``level`` with wrapping."""
    n = 1 << level
    parts = []
    for ids, cx, cy in cand:
        if len(ids) == 0:
            continue
        if tree.periodic:
            wx, wy = cx % n, cy % n
            sh = np.stack([(cx - wx) // n, (cy - wy) // n], axis=1)
        else:
            wx, wy = cx, cy
            sh = np.zeros((len(ids), 2), dtype=np.int64)
        src = tree.find(np.full(len(ids), level), wx, wy)
        ok = src >= 0
        parts.append(PairList(ids[ok], src[ok], sh[ok]))
    return _unique_pairs(PairList.concat(parts))
