"""Free-space heat flow on the periodic unit square from piecewise-constant data.

u(x, t) = 1/(4 pi t) * periodic Gauss transform of f with delta = 4 t.
"""
import math

import numpy as np

from . import hermite as H
from .engine import FGT
from .quadtree import build_uniform_tree, cutoff_level

LEVELS = 5


def initial_tree(seed=0, levels=LEVELS, k=8):
    """32 x 32 uniform periodic leaves, each holding a seeded random constant in [0, 1]."""
    rng = np.random.default_rng(seed)
    tree = build_uniform_tree(levels, k=k, periodic=True)
    c = rng.random(tree.nleaves)
    tree.set_values(np.broadcast_to(c[:, None, None], (tree.nleaves, k, k)))
    return tree, c


def heat_params(t):
    """(delta, prefactor) for time t."""
    return 4.0 * t, 1.0 / (4.0 * math.pi * t)


def solve(tree, t, eps, targets=None, prefactor=True, **kw):
    delta, gamma = heat_params(t)
    if not prefactor:
        gamma = 1.0
    fgt = FGT(tree, delta, eps, kernel_prefactor=gamma, **kw)
    res = fgt.run(targets=targets, grid=True)
    if not prefactor:
        scale = 1.0 / (4.0 * math.pi * t)
        res.grid_values *= scale
        res.point_values *= scale
    res.stats["plan_orders"] = dict(fgt.plan.hermite_order)
    return res


def periodic_mean(tree, t, eps, n=128, **kw):
    """Box average of u from an n x n trapezoid grid (spectrally accurate for periodic u)."""
    g = (np.arange(n) + 0.5) / n
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    return float(solve(tree, t, eps, targets=pts, **kw).point_values.mean())


def plan_orders(t, eps, prefactor, levels=LEVELS):
    """Hermite orders per level the engine would choose for this time step."""
    delta, gamma = heat_params(t)
    e = eps / gamma if prefactor else eps
    lc = cutoff_level(levels, delta, e)
    return H.choose_orders_sharp(delta, e, levels, lc).hermite_order
