"""Spherical harmonics and 3D Zernike basis functions on the unit ball.

Conventions (kept consistent across the whole package):

* points are ``(theta, phi, r)`` with azimuth ``theta`` in ``[0, 2*pi)``,
  polar angle ``phi`` in ``[0, pi]`` measured from the +z pole, and radius
  ``r`` in ``[0, 1]``;
* the associated Legendre function ``P_l^m`` carries the Condon-Shortley
  factor ``(-1)^m``;
* the spherical harmonic carries one further ``(-1)^m``:

      Y_{l,m}(theta, phi) = (-1)^m * sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!)
                            * P_l^m(cos phi) * exp(i m theta)

  so that ``Y_{l,-m} = (-1)^m * conj(Y_{l,m})``;
* the radial polynomial is ``R_{n,l}(r) = sum_v q_{n,l}^v r^(2v+l)`` with
  ``v`` running over ``0 .. (n-l)/2`` (the binomial ``C((n-l)/2, v)``
  vanishes beyond that bound), and the full basis function is
  ``Z_{n,l,m} = R_{n,l}(r) * Y_{l,m}(theta, phi)``.

With this normalization the basis is orthogonal on the ball with a single
measured Gram constant ``ORTHOGONALITY_CONSTANT = 1/3`` on the diagonal
(see :func:`ballconv.quadrature.measure_orthogonality_constant`).

Evaluation uses the standard stable recurrences (seed ``P_m^m``, upward in
``l``); negative orders are never fed to the Legendre recurrence.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, pi, sqrt

import numpy as np

__all__ = [
    "HarmonicIndex",
    "ZernikeIndex",
    "BallPoint",
    "assoc_legendre",
    "sph_harmonic",
    "zernike_radial_coeff",
    "zernike_radial",
    "zernike_eval",
    "basis_matrix",
    "radial_coefficients",
    "radial_matrix",
]


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree/order pair for a spherical harmonic, ``|m| <= l``."""

    l: int
    m: int

    def __post_init__(self) -> None:
        if self.l < 0:
            raise ValueError(f"degree l must be non-negative, got {self.l}")
        if abs(self.m) > self.l:
            raise ValueError(f"|m| <= l required, got (l={self.l}, m={self.m})")


@dataclass(frozen=True)
class ZernikeIndex:
    """Radial/angular index triple with ``n - l`` even, ``|m| <= l <= n``."""

    n: int
    l: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 0 or not (0 <= self.l <= self.n):
            raise ValueError(f"need 0 <= l <= n, got (n={self.n}, l={self.l})")
        if (self.n - self.l) % 2:
            raise ValueError(f"n - l must be even, got (n={self.n}, l={self.l})")
        if abs(self.m) > self.l:
            raise ValueError(f"|m| <= l required, got (l={self.l}, m={self.m})")


@dataclass(frozen=True)
class BallPoint:
    """A point of the closed unit ball in spherical coordinates."""

    theta: float
    phi: float
    r: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"radius must lie in [0, 1], got {self.r}")
        if not 0.0 <= self.phi <= pi:
            raise ValueError(f"polar angle must lie in [0, pi], got {self.phi}")


def assoc_legendre(l: int, m: int, x):
    """Associated Legendre function ``P_l^m(x)`` for ``0 <= m <= l``.

    Includes the Condon-Shortley phase.  ``x`` may be a scalar or an array
    with ``|x| <= 1``.  Computed with the ``P_m^m`` seed and the upward
    three-term recurrence in ``l``, not by differentiating the Rodrigues
    form.
    """
    if m < 0 or m > l:
        raise ValueError(f"order must satisfy 0 <= m <= l, got (l={l}, m={m})")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("argument of assoc_legendre must lie in [-1, 1]")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = _legendre_upward(l, m, x)
    return float(out[0]) if scalar else out


def _legendre_upward(l: int, m: int, x: np.ndarray) -> np.ndarray:
    somx2 = np.sqrt(np.clip((1.0 - x) * (1.0 + x), 0.0, None))
    pmm = np.ones_like(x)
    for i in range(1, m + 1):
        pmm = pmm * (-(2 * i - 1)) * somx2
    if l == m:
        return pmm
    pmmp1 = x * (2 * m + 1) * pmm
    if l == m + 1:
        return pmmp1
    for ll in range(m + 2, l + 1):
        pll = (x * (2 * ll - 1) * pmmp1 - (ll + m - 1) * pmm) / (ll - m)
        pmm, pmmp1 = pmmp1, pll
    return pmmp1


def _legendre_table(lmax: int, x: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """All ``P_l^m`` for ``0 <= m <= l <= lmax`` over a point batch."""
    somx2 = np.sqrt(np.clip((1.0 - x) * (1.0 + x), 0.0, None))
    table: dict[tuple[int, int], np.ndarray] = {}
    pmm = np.ones_like(x)
    for m in range(lmax + 1):
        if m > 0:
            pmm = pmm * (-(2 * m - 1)) * somx2
        table[(m, m)] = pmm
        if m + 1 <= lmax:
            table[(m + 1, m)] = x * (2 * m + 1) * pmm
        for l in range(m + 2, lmax + 1):
            table[(l, m)] = (
                x * (2 * l - 1) * table[(l - 1, m)] - (l + m - 1) * table[(l - 2, m)]
            ) / (l - m)
    return table


def _harmonic_norm(l: int, m: int) -> float:
    return sqrt((2 * l + 1) / (4.0 * pi) * factorial(l - m) / factorial(l + m))


def sph_harmonic(l: int, m: int, theta, phi):
    """Spherical harmonic ``Y_{l,m}(theta, phi)`` (complex).

    For ``m < 0`` the conjugation identity ``Y_{l,-m} = (-1)^m conj(Y_{l,m})``
    is used instead of a negative-order Legendre evaluation.
    """
    HarmonicIndex(l, m)
    if m < 0:
        return (-1) ** (-m) * np.conj(sph_harmonic(l, -m, theta, phi))
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    scalar = theta.ndim == 0 and phi.ndim == 0
    theta, phi = np.atleast_1d(theta), np.atleast_1d(phi)
    val = (
        (-1) ** m
        * _harmonic_norm(l, m)
        * _legendre_upward(l, m, np.cos(phi))
        * np.exp(1j * m * theta)
    )
    return complex(val[0]) if scalar else val


@lru_cache(maxsize=None)
def _radial_coefficients_exact(n: int, l: int) -> tuple[Fraction, ...]:
    """Rational part of ``q_{n,l}^v`` for all valid ``v`` (exact integers)."""
    k = (n - l) // 2
    coeffs = []
    for v in range(k + 1):
        num = (-1) ** (k + v) * comb(2 * k, k) * comb(k, v) * comb(2 * (k + l + v) + 1, 2 * k)
        den = 4 ** k * comb(k + l + v, k)
        coeffs.append(Fraction(num, den))
    return tuple(coeffs)


def radial_coefficients(n: int, l: int) -> np.ndarray:
    """All coefficients ``q_{n,l}^v`` for ``v = 0 .. (n-l)/2``.

    The rational factor is assembled with exact integer binomials; only the
    final ``sqrt((2n+3)/3)`` scaling is floating point, which keeps the
    values exact to one rounding for ``n <= 20``.
    """
    _validate_radial(n, l)
    scale = sqrt((2 * n + 3) / 3.0)
    return np.array([float(c) for c in _radial_coefficients_exact(n, l)]) * scale


def _validate_radial(n: int, l: int) -> None:
    if n < 0 or not (0 <= l <= n) or (n - l) % 2:
        raise ValueError(f"invalid radial index (n={n}, l={l}): need 0 <= l <= n, n - l even")


def zernike_radial_coeff(n: int, l: int, v: int) -> float:
    """Single radial coefficient ``q_{n,l}^v``."""
    _validate_radial(n, l)
    if not 0 <= v <= (n - l) // 2:
        raise ValueError(f"v must lie in [0, {(n - l) // 2}] for (n={n}, l={l}), got {v}")
    return float(radial_coefficients(n, l)[v])


def zernike_radial(n: int, l: int, r):
    """Radial polynomial ``R_{n,l}(r) = sum_v q_{n,l}^v r^(2v+l)``."""
    q = radial_coefficients(n, l)
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.zeros_like(r)
    for v, qv in enumerate(q):
        out += qv * r ** (2 * v + l)
    return float(out[0]) if scalar else out


def zernike_eval(n: int, l: int, m: int, theta, phi, r):
    """Basis function ``Z_{n,l,m}(theta, phi, r) = R_{n,l}(r) Y_{l,m}(theta, phi)``."""
    ZernikeIndex(n, l, m)
    return zernike_radial(n, l, r) * sph_harmonic(l, m, theta, phi)


def radial_matrix(pairs, r: np.ndarray) -> np.ndarray:
    """``R_{n,l}(r)`` for a list of ``(n, l)`` pairs; shape ``(len(r), len(pairs))``.

    Shares the power table across pairs; the per-entry summation order is
    fixed (ascending ``v``) so results do not depend on batching.
    """
    r = np.asarray(r, dtype=float)
    max_pow = max((n for n, _ in pairs), default=0)
    powers = np.empty((max_pow + 1, r.size))
    powers[0] = 1.0
    for p in range(1, max_pow + 1):
        powers[p] = powers[p - 1] * r
    out = np.empty((r.size, len(pairs)))
    for j, (n, l) in enumerate(pairs):
        q = radial_coefficients(n, l)
        acc = np.zeros(r.size)
        for v, qv in enumerate(q):
            acc += qv * powers[2 * v + l]
        out[:, j] = acc
    return out


def basis_matrix(entries, theta, phi, r) -> np.ndarray:
    """Dense evaluation ``B[i, j] = Z_{entries[j]}(point_i)``.

    ``entries`` is a sequence of ``(n, l, m)`` triples (negative ``m``
    allowed, resolved through the conjugation identity).  This is the batch
    surface consumed by the moment-fitting design matrices; evaluation is
    vectorized over points with shared Legendre/radial/exponential tables.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    if not (theta.size == phi.size == r.size):
        raise ValueError("theta, phi, r must have equal lengths")
    entries = [tuple(e) for e in entries]
    lmax = max((l for _, l, _ in entries), default=0)
    mmax = max((abs(m) for _, _, m in entries), default=0)

    ptab = _legendre_table(lmax, np.cos(phi))
    etab = {m: np.exp(1j * m * theta) for m in range(mmax + 1)}
    pairs = sorted({(n, l) for n, l, _ in entries})
    rtab = radial_matrix(pairs, r)
    rcol = {p: rtab[:, j] for j, p in enumerate(pairs)}

    out = np.empty((theta.size, len(entries)), dtype=complex)
    for j, (n, l, m) in enumerate(entries):
        am = abs(m)
        y = (-1) ** am * _harmonic_norm(l, am) * ptab[(l, am)] * etab[am]
        if m < 0:
            y = (-1) ** am * np.conj(y)
        out[:, j] = rcol[(n, l)] * y
    return out
