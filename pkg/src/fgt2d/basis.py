"""Leaf polynomial bases on the reference interval [-1, 1].

Orders ``k >= 8`` use Chebyshev polynomials on first-kind Chebyshev nodes;
lower orders use monomials fitted by least squares on the same grid.
Coefficients are stored as a k-by-k matrix indexed ``[n1, n2]`` with the
entries of total degree ``n1 + n2 >= k`` held at zero.
"""
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as npcheb


def basis_kind(k):
    return "cheb" if k >= 8 else "mono"


@lru_cache(maxsize=None)
def cheb_nodes(k):
    """First-kind Chebyshev nodes, ascending."""
    i = np.arange(k)
    x = -np.cos((2 * i + 1) * np.pi / (2 * k))
    x.flags.writeable = False
    return x


def eval_basis(kind, n, x):
    """Values of the first ``n`` 1D basis functions; shape x.shape + (n,)."""
    x = np.asarray(x, dtype=float)
    if kind == "cheb":
        return npcheb.chebvander(x, n - 1)
    return x[..., None] ** np.arange(n)


def triangle_mask(k):
    n = np.arange(k)
    return (n[:, None] + n[None, :]) < k


def triangle_index(k):
    """(n1, n2) pairs of total degree < k in lexicographic order; length k(k+1)/2."""
    return [(a, b) for a in range(k) for b in range(k - a)]


@lru_cache(maxsize=None)
def _cheb_inverse(k):
    V = npcheb.chebvander(cheb_nodes(k), k - 1)
    Vi = np.linalg.inv(V)
    Vi.flags.writeable = False
    return Vi


@lru_cache(maxsize=None)
def projection_operator(k):
    """Least-squares solution operator P (N_k x k^2) for the monomial basis."""
    x = cheb_nodes(k)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    idx = triangle_index(k)
    V = np.stack([X1.ravel() ** a * X2.ravel() ** b for a, b in idx], axis=1)
    Q, R = np.linalg.qr(V)
    P = np.linalg.solve(R, Q.T)
    P.flags.writeable = False
    return P


def samples_to_coeffs(samples, k):
    """Coefficient matrices for one (k, k) or a stack (..., k, k) of grid samples."""
    samples = np.asarray(samples, dtype=float)
    if basis_kind(k) == "cheb":
        Vi = _cheb_inverse(k)
        C = np.einsum("ai,...ij,bj->...ab", Vi, samples, Vi)
        return C * triangle_mask(k)
    P = projection_operator(k)
    flat = samples.reshape(samples.shape[:-2] + (k * k,))
    vec = flat @ P.T
    C = np.zeros(samples.shape[:-2] + (k, k))
    for j, (a, b) in enumerate(triangle_index(k)):
        C[..., a, b] = vec[..., j]
    return C


def full_cheb_coeffs(values):
    """Full tensor Chebyshev coefficients of (..., k, k) grid values."""
    k = values.shape[-1]
    Vi = _cheb_inverse(k)
    return np.einsum("ai,...ij,bj->...ab", Vi, values, Vi)


def interpolate(values, xi):
    """Tensor Chebyshev interpolation of k-by-k grid values at local points ``xi`` (m, 2)."""
    k = values.shape[-1]
    C = full_cheb_coeffs(values)
    xi = np.atleast_2d(xi)
    T1 = npcheb.chebvander(xi[:, 0], k - 1)
    T2 = npcheb.chebvander(xi[:, 1], k - 1)
    return np.einsum("ma,ab,mb->m", T1, C, T2)


def evaluate(coeffs, xi, kind):
    """Evaluate a coefficient matrix at local points ``xi`` (m, 2)."""
    k = coeffs.shape[-1]
    xi = np.atleast_2d(xi)
    return np.einsum("ma,ab,mb->m", eval_basis(kind, k, xi[:, 0]), coeffs, eval_basis(kind, k, xi[:, 1]))
