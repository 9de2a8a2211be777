"""Axial symmetry of ball functions about arbitrary axes.

The power of the projection of ``f`` onto the subspace of functions
symmetric about the axis pointing to ``(alpha, beta)`` has the closed form

    P(f; alpha, beta) = c_norm * sum_{n,l} (4*pi / (2l+1)) *
                        | sum_m Omega_{n,l,m}(f) Y_{l,m}(alpha, beta) |^2

a deterministic, differentiable chain of products.  The inner sum is the
zonal coefficient of the axis-aligned rotation of ``f`` (up to the
per-degree factor), so the value agrees with the rotate / project onto
``m = 0`` / Parseval route and is bounded by the total power
``c_norm * sum |Omega|^2`` via Cauchy-Schwarz and the addition theorem.
Dividing by the total power gives a scale-free measure in ``[0, 1]`` that
equals 1 exactly when ``f`` is symmetric about the axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt

import numpy as np

from . import basis
from .moments import ComplexMomentSet
from .quadrature import orthogonality_constant

#: Four equi-angular axes (tetrahedral vertices) as (alpha, beta) pairs.
TETRAHEDRAL_AXES: tuple[tuple[float, float], ...] = tuple(
    (float(np.mod(np.arctan2(y, x), 2.0 * pi)), float(np.arccos(z / sqrt(3.0))))
    for x, y, z in [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
)


@dataclass(frozen=True)
class Axis:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= pi:
            raise ValueError(f"polar angle must lie in [0, pi], got {self.beta}")


def _zonal_projection_coeffs(f: ComplexMomentSet, axis: Axis) -> dict[tuple[int, int], complex]:
    """``sum_m Omega_{n,l,m} Y_{l,m}(axis)`` per (n, l)."""
    layout = f.layout
    pairs = sorted({(l, m) for _, l, m in layout.complex_entries})
    y = {lm: basis.sph_harmonic(lm[0], lm[1], axis.alpha, axis.beta) for lm in pairs}
    acc: dict[tuple[int, int], complex] = {}
    for i, (n, l, m) in enumerate(layout.complex_entries):
        acc[(n, l)] = acc.get((n, l), 0.0) + f.omega[i] * y[(l, m)]
    return acc


def symmetry_power(f: ComplexMomentSet, axis: Axis) -> float:
    """Power of the projection of ``f`` onto the symmetric subspace about ``axis``."""
    acc = _zonal_projection_coeffs(f, axis)
    c = orthogonality_constant()
    return float(sum(
        c * (4.0 * pi / (2 * l + 1)) * abs(v) ** 2 for (n, l), v in acc.items()))


def normalized_symmetry(f: ComplexMomentSet, axis: Axis) -> float:
    """``symmetry_power / total power``; 1 iff ``f`` is symmetric about the axis."""
    total = f.total_power()
    if total <= 0.0:
        raise ValueError("normalized symmetry is undefined for a zero function")
    return symmetry_power(f, axis) / (orthogonality_constant() * total)


def symmetry_descriptor(f: ComplexMomentSet, axes=None) -> np.ndarray:
    """Concatenated normalized symmetry about each axis (default: 4 tetrahedral)."""
    if axes is None:
        axes = [Axis(a, b) for a, b in TETRAHEDRAL_AXES]
    axes = list(axes)
    if not axes:
        raise ValueError("axis list must be non-empty")
    return np.array([normalized_symmetry(f, ax) for ax in axes])


def axis_scan(f: ComplexMomentSet, n_azimuth: int = 16, n_polar: int = 8):
    """Grid scan utility: normalized symmetry over an equiangular axis grid.

    Returns ``(axes, values)`` with the best axis first in neither list;
    callers sort as needed.  No continuous optimizer is provided.
    """
    alphas = 2.0 * pi * np.arange(n_azimuth) / n_azimuth
    betas = pi * (np.arange(n_polar) + 0.5) / n_polar
    axes = [Axis(float(a), float(b)) for a in alphas for b in betas]
    values = np.array([normalized_symmetry(f, ax) for ax in axes])
    return axes, values
