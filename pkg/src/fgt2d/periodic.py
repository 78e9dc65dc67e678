"""Periodic images on the unit square.

Far images (all tiles except the 3x3 block around the unit cell) reach the root
box through one local expansion built from lattice sums

    L[g1, g2] = sum over j in Z^2, max|j_i| >= 2, of h_g1(j1/sqrt(delta)) h_g2(j2/sqrt(delta)).

The near 3x3 block is handled by wrapping every box list (see
``quadtree.compute_lists`` on a periodic tree).
"""
import math

import numpy as np

from .hermite import LocalExpansion
from .kernels import hermite_rows
from .quadtree import Tree, compute_lists


def _tail_count(delta, floor=1e-300):
    # h_n(m/sqrt(delta)) ~ poly * exp(-m^2/delta); go well past the underflow point
    return int(math.ceil(math.sqrt(delta * math.log(1.0 / floor)))) + 8


def lattice_sums_1d(delta, n):
    """(F, N): full-line sums sum_m h_g(m/sqrt(delta)) and the |m| <= 1 part, g < n."""
    sd = math.sqrt(delta)
    M = _tail_count(delta)
    m = np.arange(-M, M + 1)
    H = hermite_rows(m / sd, n)
    near = np.abs(m) <= 1
    return H.sum(axis=0), H[near].sum(axis=0)


def lattice_sums(delta, n):
    """Punctured-lattice sums L (n x n), computed from 1D spatial tails.

    Splitting the punctured lattice as {|j1| >= 2} and {|j1| <= 1, |j2| >= 2}
    gives L = D (x) F + N (x) D with D = F - N formed from the tail terms
    directly, so no cancellation occurs.
    """
    sd = math.sqrt(delta)
    M = _tail_count(delta)
    m = np.arange(-M, M + 1)
    H = hermite_rows(m / sd, n)
    far = np.abs(m) >= 2
    D = H[far].sum(axis=0)
    N = H[~far].sum(axis=0)
    F = D + N
    L = np.outer(D, F) + np.outer(N, D)
    odd = (np.arange(n) % 2) == 1
    L[odd, :] = 0.0
    L[:, odd] = 0.0
    return L


def poisson_sums_1d(delta, n, stop=1e-18):
    """sum_m h_g(m/sqrt(delta)) through its Fourier dual sqrt(pi delta) sum_m (-2 pi i sqrt(delta) m)^g exp(-pi^2 m^2 delta)."""
    sd = math.sqrt(delta)
    out = np.zeros(n, dtype=complex)
    out[0] = 1.0
    m = 1
    while True:
        base = math.exp(-math.pi ** 2 * m * m * delta)
        terms = np.array([(-2j * math.pi * sd * m) ** g for g in range(n)]) * base
        # +m and -m: odd powers cancel, even powers double
        terms[1::2] = 0.0
        out += 2.0 * terms
        if np.abs(terms).max() < stop * max(1.0, np.abs(out).max()) and m * m * math.pi ** 2 * delta > n:
            break
        m += 1
    out *= math.sqrt(math.pi * delta)
    if np.abs(out.imag).max() > 1e-14 * max(np.abs(out.real).max(), 1e-300):
        raise ArithmeticError("lattice sum imaginary residue too large")
    return out.real


def lattice_sums_poisson(delta, n):
    """Punctured-lattice sums from full-lattice Poisson sums minus the nine near tiles."""
    F = poisson_sums_1d(delta, n)
    _, N = lattice_sums_1d(delta, n)
    L = np.outer(F, F) - np.outer(N, N)
    odd = (np.arange(n) % 2) == 1
    L[odd, :] = 0.0
    L[:, odd] = 0.0
    return L


def root_local_coeffs(A, L, q):
    """C[b] = (-1)^|b| / b! * sum_a A[a] L[a + b]."""
    p = A.shape[0]
    W = np.lib.stride_tricks.sliding_window_view(L, (q, q))[:p, :p]
    C = np.einsum("ac,acbd->bd", A, W)
    inv = np.cumprod(np.concatenate([[1.0], 1.0 / np.arange(1, q)]))
    sgn = inv * (-1.0) ** np.arange(q)
    return sgn[:, None] * C * sgn[None, :]


def form_root_local(root_hermite, delta, q=None):
    """Incoming local expansion at the root from all far images of the root sources."""
    q = q or root_hermite.p
    L = lattice_sums(delta, root_hermite.p + q)
    C = root_local_coeffs(root_hermite.coeffs, L, q)
    return LocalExpansion(root_hermite.center, root_hermite.sqrt_delta, C)


def periodic_wrap(tree):
    """Box lists of ``tree`` computed modulo unit translations."""
    if not tree.periodic:
        tree = Tree(tree.cells(), k=tree.k, domain=tree.domain, periodic=True, values=tree.values)
    return compute_lists(tree)
