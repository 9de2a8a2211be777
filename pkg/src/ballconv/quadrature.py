"""Quadrature grids on the ball and the sphere.

All grids return plain measure weights: ``sum(w_i * h(p_i))`` approximates
``integral h dV`` over the ball (the ``r^2 sin(phi)`` Jacobian is folded
into the weights) or ``integral h dS`` over the sphere surface.

The product rule is Gauss-Legendre in ``r`` and in ``cos(phi)`` and a
uniform (trapezoid, periodic) rule in ``theta``.  For integrands that are
Cartesian polynomials of total degree ``d`` the rule is exact whenever
``n_theta > d``, ``2*n_polar - 1 >= d`` and ``2*n_r - 1 >= d + 2``; all the
basis products used in this package are such polynomials, so orthogonality
constants below come out exact to rounding.
"""

from __future__ import annotations

from functools import lru_cache
from math import pi

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import basis
from .layout import get_layout


def ball_grid(n_r: int = 64, n_polar: int = 64, n_theta: int = 64):
    """Product quadrature for the unit ball.

    Returns ``(theta, phi, r, w)`` flat arrays with ``w`` the dV weights.
    """
    xr, wr = leggauss(n_r)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr * r ** 2
    x, wx = leggauss(n_polar)
    phi = np.arccos(x)
    th = 2.0 * pi * np.arange(n_theta) / n_theta
    wt = np.full(n_theta, 2.0 * pi / n_theta)

    R, P, T = np.meshgrid(r, phi, th, indexing="ij")
    W = wr[:, None, None] * wx[None, :, None] * wt[None, None, :]
    return T.ravel(), P.ravel(), R.ravel(), W.ravel()


def sphere_grid(n_polar: int = 64, n_theta: int = 64):
    """Product quadrature for the unit sphere surface (dS weights)."""
    x, wx = leggauss(n_polar)
    phi = np.arccos(x)
    th = 2.0 * pi * np.arange(n_theta) / n_theta
    wt = np.full(n_theta, 2.0 * pi / n_theta)
    P, T = np.meshgrid(phi, th, indexing="ij")
    W = wx[:, None] * wt[None, :]
    return T.ravel(), P.ravel(), W.ravel()


def uniform_ball_samples(n: int, rng: np.random.Generator):
    """Volume-uniform random samples of the ball as ``(theta, phi, r)``."""
    theta = rng.uniform(0.0, 2.0 * pi, n)
    phi = np.arccos(rng.uniform(-1.0, 1.0, n))
    r = rng.uniform(0.0, 1.0, n) ** (1.0 / 3.0)
    return theta, phi, r


def gram_matrix(N: int, n_r: int = 64, n_polar: int = 64, n_theta: int = 64,
                chunk: int = 8192) -> np.ndarray:
    """Dense Gram matrix ``G_ij = integral Z_i Z_j^dagger dV`` at order ``N``.

    Accumulated over point chunks to bound memory; the summation order is
    fixed by the chunking, which itself is deterministic.
    """
    layout = get_layout(N)
    entries = layout.complex_entries
    theta, phi, r, w = ball_grid(n_r, n_polar, n_theta)
    G = np.zeros((len(entries), len(entries)), dtype=complex)
    for start in range(0, theta.size, chunk):
        sl = slice(start, start + chunk)
        B = basis.basis_matrix(entries, theta[sl], phi[sl], r[sl])
        G += (B * w[sl][:, None]).conj().T @ B
    return G


@lru_cache(maxsize=None)
def measure_orthogonality_constant(N: int = 6) -> float:
    """Measured Gram diagonal of the basis (uniform across all indices).

    Uses a small product rule that is exact for the basis products, so the
    value is the true constant up to rounding; the printed figure is 1/3.
    The measured value, not an assumed constant, is what every downstream
    formula (convolution, symmetry, quadrature moments) consumes.
    """
    n_nodes = max(2 * N + 4, 8)
    G = gram_matrix(N, n_r=n_nodes, n_polar=n_nodes, n_theta=max(4 * N + 2, 8))
    diag = np.real(np.diag(G))
    spread = (diag.max() - diag.min()) / diag.min()
    if spread > 1e-10:
        raise RuntimeError(f"Gram diagonal is not uniform (relative spread {spread:.2e})")
    return float(diag.mean())


def orthogonality_constant() -> float:
    """The measured constant at the default order (cached)."""
    return measure_orthogonality_constant(6)
