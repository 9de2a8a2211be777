"""Moment estimation on the unit ball: least-squares fits with an iterative
pseudo-inverse, direct quadrature moments, and reconstruction.

The real parameterization writes a band-limited function as

    f(p) ~= sum_{0<=m<=l<=n<=N} A_{n,l,m} Re{Z_{n,l,m}(p)}
                               + B_{n,l,m} Im{Z_{n,l,m}(p)}

collected as ``c = (a^T, b^T)^T``; stacking sample points row-wise gives the
design matrix ``X = (U, V)`` and the overdetermined system ``f = X c``
solved through the Moore-Penrose pseudo-inverse.  The bridge to the complex
coefficients is

    Omega_{n,l,0} = A_{n,l,0}
    Omega_{n,l,m} = (A_{n,l,m} - i B_{n,l,m}) / 2                 (m > 0)
    Omega_{n,l,-m} = (-1)^m (A_{n,l,m} + i B_{n,l,m}) / 2         (m > 0)

which is verified numerically by the test suite rather than assumed.
``Im Z_{n,l,0}`` vanishes identically, so the 16 corresponding columns of
``V`` (at order 6) are exactly zero and the pseudo-inverse pins those
coefficients to zero.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from math import pi

import numpy as np

from . import basis
from .layout import LAYOUT_VERSION, MomentLayout, get_layout
from .quadrature import orthogonality_constant

MAGIC_MOMENTS = b"ZMV1"

#: Spectral-bound default from the source method; callers fitting sample
#: clouds of unknown scale should prefer ``alpha=None`` (auto).
DEFAULT_PINV_ALPHA = 0.001

#: Iteration defaults: accuracy-dominated offline fitting vs. the fixed
#: differentiable chain used inside training pipelines.
OFFLINE_PINV_ITERS = 30
NETWORK_PINV_ITERS = 3


class LayoutMismatchError(ValueError):
    pass


@dataclass
class SampleSet:
    """Sampled function values on the ball, with optional dV quadrature weights."""

    theta: np.ndarray
    phi: np.ndarray
    r: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        self.phi = np.asarray(self.phi, dtype=float).ravel()
        self.r = np.asarray(self.r, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        sizes = {self.theta.size, self.phi.size, self.r.size, self.values.size}
        if len(sizes) != 1:
            raise ValueError("sample arrays must have equal lengths")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if self.weights.size != self.values.size:
                raise ValueError("weights length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample values must be finite")

    def __len__(self) -> int:
        return self.values.size

    def subset(self, index: np.ndarray) -> "SampleSet":
        w = None if self.weights is None else self.weights[index]
        return SampleSet(self.theta[index], self.phi[index], self.r[index],
                         self.values[index], w)

    def with_mc_weights(self) -> "SampleSet":
        """Attach Monte-Carlo volume weights ``(4*pi/3) / K``."""
        k = len(self)
        w = np.full(k, (4.0 * pi / 3.0) / k)
        return SampleSet(self.theta, self.phi, self.r, self.values, w)


@dataclass
class MomentVector:
    """Real coefficient vector ``c`` over a frozen layout."""

    layout: MomentLayout
    c: np.ndarray

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.c.size != self.layout.dim:
            raise LayoutMismatchError(
                f"coefficient vector has length {self.c.size}, layout needs {self.layout.dim}")

    @property
    def a(self) -> np.ndarray:
        return self.c[: self.layout.n_entries]

    @property
    def b(self) -> np.ndarray:
        return self.c[self.layout.n_entries:]

    def copy(self) -> "MomentVector":
        return MomentVector(self.layout, self.c.copy())


@dataclass
class ComplexMomentSet:
    """Complex coefficients over the full index range ``-l <= m <= l``."""

    layout: MomentLayout
    omega: np.ndarray

    def __post_init__(self) -> None:
        self.omega = np.asarray(self.omega, dtype=complex).ravel()
        if self.omega.size != len(self.layout.complex_entries):
            raise LayoutMismatchError(
                f"omega has length {self.omega.size}, layout needs "
                f"{len(self.layout.complex_entries)}")

    def __getitem__(self, nlm: tuple[int, int, int]) -> complex:
        return complex(self.omega[self.layout.complex_index(*nlm)])

    def total_power(self) -> float:
        """``sum |Omega|^2`` over all indices."""
        return float(np.sum(np.abs(self.omega) ** 2))


@dataclass
class DesignMatrix:
    """``X = (U, V)`` evaluated at a sample set; shape ``K x layout.dim``."""

    layout: MomentLayout
    X: np.ndarray = field(repr=False)


def build_design_matrix(samples: SampleSet, N: int) -> DesignMatrix:
    """Evaluate the real basis at every sample point.

    Column ``j_a(n,l,m)`` holds ``Re Z_{n,l,m}``, column ``j_b(n,l,m)``
    holds ``Im Z_{n,l,m}``; the ``m = 0`` columns of the V block are all
    exactly zero.
    """
    if np.any(samples.r > 1.0 + 1e-9):
        raise ValueError(f"sample radius exceeds 1 (max {samples.r.max():.6g})")
    layout = get_layout(N)
    B = basis.basis_matrix(layout.entries, samples.theta, samples.phi, samples.r)
    return DesignMatrix(layout, np.hstack([B.real, B.imag]))


def estimate_spectral_radius(A: np.ndarray, iters: int = 10) -> float:
    """Power-iteration estimate of ``rho(A A^T)`` (deterministic start)."""
    n = A.shape[1]
    v = A.T @ (A @ np.ones(n))
    nv = np.linalg.norm(v)
    v = v / nv if nv > 0 else np.ones(n) / np.sqrt(n)
    rho = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        rho = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return rho


def pinv_newton_schulz(A: np.ndarray, alpha: float = DEFAULT_PINV_ALPHA,
                       iters: int = OFFLINE_PINV_ITERS) -> np.ndarray:
    """Moore-Penrose pseudo-inverse by the hyperpower iteration

        V_{k+1} = V_k (3I - A V_k (3I - A V_k)),    V_0 = alpha * A^T.

    Convergence requires ``0 < alpha < 2 / rho(A A^T)``; the bound is
    checked with a cheap 10-step power iteration and violations raise.
    The iteration is a fixed chain of matrix products with no branching on
    values, evaluated on the small (``n x n``) side:

        V_{k+1} = (3I - 3 M + M^2) V_k,   M = V_k A.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("pinv_newton_schulz expects a 2-D matrix")
    rho = estimate_spectral_radius(A)
    if alpha <= 0.0 or (rho > 0.0 and alpha >= 2.0 / rho):
        raise ValueError(
            f"alpha={alpha:g} violates the spectral bound (0, {2.0 / rho if rho > 0 else np.inf:g}) "
            f"estimated from rho(AA^T)~{rho:.4g}")
    V = alpha * A.T
    for _ in range(iters):
        M = V @ A
        MV = M @ V
        V = 3.0 * (V - MV) + M @ MV
    return V


def _auto_alpha(A: np.ndarray) -> float:
    rho = estimate_spectral_radius(A)
    if rho <= 0.0:
        return DEFAULT_PINV_ALPHA
    # Safely inside the bound; power iteration can under-estimate rho.
    return 1.0 / rho


def fit_moments(samples: SampleSet, N: int, pinv_iters: int = OFFLINE_PINV_ITERS,
                pinv_alpha: float | None = None,
                warn_underdetermined: bool = True) -> MomentVector:
    """Least-squares moments ``c = X^+ f``.

    ``pinv_alpha=None`` scales the initial iterate from the measured
    spectral radius, which keeps the iteration convergent for any sample
    count; passing an explicit value forwards it unchanged (and propagates
    the spectral-bound failure if it violates the bound).
    """
    dm = build_design_matrix(samples, N)
    if warn_underdetermined and len(samples) < dm.layout.dim:
        warnings.warn(
            f"fitting {dm.layout.dim} coefficients from only {len(samples)} samples; "
            "the pseudo-inverse returns the minimum-norm solution", stacklevel=2)
    alpha = _auto_alpha(dm.X) if pinv_alpha is None else pinv_alpha
    P = pinv_newton_schulz(dm.X, alpha=alpha, iters=pinv_iters)
    return MomentVector(dm.layout, P @ samples.values)


def quadrature_moments(samples: SampleSet, N: int) -> ComplexMomentSet:
    """Moments by direct numerical integration against the basis.

    ``Omega_e = (1 / c_norm) * sum_i w_i f_i Z_e(p_i)^dagger`` with the
    measured orthogonality constant ``c_norm``, so the result feeds the same
    reconstruction and convolution formulas as fitted moments.
    """
    if samples.weights is None:
        raise ValueError("quadrature_moments requires sample weights "
                         "(use SampleSet.with_mc_weights() for point clouds)")
    layout = get_layout(N)
    B = basis.basis_matrix(layout.complex_entries, samples.theta, samples.phi, samples.r)
    wf = samples.weights * samples.values
    return ComplexMomentSet(layout, (B.conj().T @ wf) / orthogonality_constant())


def real_to_complex(c: MomentVector) -> ComplexMomentSet:
    layout = c.layout
    omega = np.zeros(len(layout.complex_entries), dtype=complex)
    for i, (n, l, m) in enumerate(layout.entries):
        A = c.a[i]
        B = c.b[i]
        if m == 0:
            omega[layout.complex_index(n, l, 0)] = A
        else:
            omega[layout.complex_index(n, l, m)] = 0.5 * (A - 1j * B)
            omega[layout.complex_index(n, l, -m)] = (-1) ** m * 0.5 * (A + 1j * B)
    return ComplexMomentSet(layout, omega)


def complex_to_real(om: ComplexMomentSet) -> MomentVector:
    layout = om.layout
    c = np.zeros(layout.dim)
    for i, (n, l, m) in enumerate(layout.entries):
        w = om.omega[layout.complex_index(n, l, m)]
        if m == 0:
            c[i] = w.real
        else:
            c[i] = 2.0 * w.real
            c[layout.n_entries + i] = -2.0 * w.imag
    return MomentVector(layout, c)


def reconstruct(c: MomentVector, theta, phi, r) -> np.ndarray:
    """Evaluate the band-limited reconstruction at the given points."""
    layout = c.layout
    B = basis.basis_matrix(layout.entries, theta, phi, r)
    return B.real @ c.a + B.imag @ c.b


def reconstruct_complex(om: ComplexMomentSet, theta, phi, r) -> np.ndarray:
    """Reconstruction from complex moments; real for conjugate-symmetric sets."""
    layout = om.layout
    B = basis.basis_matrix(layout.complex_entries, theta, phi, r)
    out = B @ om.omega
    return out.real


def reconstruction_error(c: MomentVector | ComplexMomentSet, samples: SampleSet):
    """Mean absolute deviation ``(1/T) sum |f - f_hat|``.

    Returns ``(raw, percent_of_mean_abs_value)``.
    """
    if len(samples) == 0:
        raise ValueError("empty sample set")
    if isinstance(c, ComplexMomentSet):
        fhat = reconstruct_complex(c, samples.theta, samples.phi, samples.r)
    else:
        fhat = reconstruct(c, samples.theta, samples.phi, samples.r)
    raw = float(np.mean(np.abs(samples.values - fhat)))
    scale = float(np.mean(np.abs(samples.values)))
    percent = 100.0 * raw / scale if scale > 0 else float("inf")
    return raw, percent


# ---------------------------------------------------------------------------
# moment files: human-readable JSON and packed little-endian binary
# ---------------------------------------------------------------------------

def save_moments_json(path, c: MomentVector) -> None:
    record = {"layout_version": c.layout.version, "N": c.layout.N, "c": c.c.tolist()}
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_moments_json(path) -> MomentVector:
    with open(path) as fh:
        record = json.load(fh)
    if record.get("layout_version") != LAYOUT_VERSION:
        raise ValueError(f"unsupported layout version {record.get('layout_version')!r}")
    return MomentVector(get_layout(int(record["N"])), np.asarray(record["c"], dtype=float))


def save_moments_binary(path, c: MomentVector) -> None:
    """Magic ``ZMV1``, then ``<u32 N> <u64 len>`` and little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_MOMENTS)
        fh.write(struct.pack("<IQ", c.layout.N, c.c.size))
        fh.write(c.c.astype("<f8").tobytes())


def load_moments_binary(path) -> MomentVector:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_MOMENTS:
            raise ValueError(f"not a moment file (magic {magic!r})")
        N, size = struct.unpack("<IQ", fh.read(12))
        data = np.frombuffer(fh.read(8 * size), dtype="<f8")
        if data.size != size:
            raise ValueError("truncated moment file")
    return MomentVector(get_layout(N), data.astype(float))
