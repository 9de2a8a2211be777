"""Named verification suites behind the ``verify`` CLI command.

Each suite returns a list of checks with the measured value, the threshold
it must stay under (or the predicate it must satisfy), and the outcome.
The suites mirror the library's contract: basis orthogonality, convolution
against spatial-domain oracles, rotation and radial-translation
equivariance, the iterative pseudo-inverse, axial symmetry, and gradient
correctness of the training pipeline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import basis, network
from .convolve import (
    DirectionGrid,
    Kernel,
    ShellDecomposition,
    build_shell_operators,
    conv_b3,
    conv_s2,
    spherical_conv,
)
from .coords import cart_to_sph, pole_to_direction, random_rotation, sph_to_cart
from .layout import get_layout
from .moments import (
    ComplexMomentSet,
    MomentVector,
    SampleSet,
    fit_moments,
    pinv_newton_schulz,
    real_to_complex,
    reconstruct,
)
from .quadrature import ball_grid, gram_matrix, orthogonality_constant, sphere_grid, uniform_ball_samples
from .symmetry import Axis, normalized_symmetry, symmetry_power

SUITE_NAMES = ("orthogonality", "equivariance", "radial", "pinv", "symmetry", "gradcheck")


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured,
                "threshold": self.threshold, "passed": self.passed, "detail": self.detail}


@dataclass
class VerifyReport:
    seed: int
    c_norm: float
    suites: dict[str, list[CheckResult]] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for checks in self.suites.values() for c in checks)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "c_norm": self.c_norm, "all_passed": self.all_passed,
                "suites": {k: [c.to_dict() for c in v] for k, v in self.suites.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyReport":
        rep = cls(int(d["seed"]), float(d["c_norm"]))
        for name, checks in d["suites"].items():
            rep.suites[name] = [CheckResult(c["name"], float(c["measured"]),
                                            float(c["threshold"]), bool(c["passed"]),
                                            c.get("detail", "")) for c in checks]
        return rep

    def format_table(self) -> str:
        lines = [f"{'check':44s} {'measured':>12s} {'threshold':>12s}  status"]
        lines.append("-" * 80)
        for suite, checks in self.suites.items():
            for c in checks:
                status = "PASS" if c.passed else "FAIL"
                lines.append(f"{suite + ':' + c.name:44s} {c.measured:12.4e} "
                             f"{c.threshold:12.4e}  {status}")
        lines.append("-" * 80)
        lines.append(f"overall: {'PASS' if self.all_passed else 'FAIL'}  (c_norm={self.c_norm:.9f})")
        return "\n".join(lines)


def _check(name, measured, threshold, detail="") -> CheckResult:
    return CheckResult(name, float(measured), float(threshold),
                       bool(measured < threshold), detail)


def _random_moments(rng, layout) -> ComplexMomentSet:
    c = rng.normal(size=layout.dim)
    c[layout.n_entries + layout.m0_positions] = 0.0
    return real_to_complex(MomentVector(layout, c))


def _random_kernel(rng, layout) -> Kernel:
    c = np.zeros(layout.dim)
    c[layout.m0_positions] = rng.normal(size=len(layout.m0_positions))
    return Kernel(MomentVector(layout, c))


# ---------------------------------------------------------------------------
# orthogonality
# ---------------------------------------------------------------------------

def run_orthogonality(seed: int = 0, nodes: int = 64, corrupt_q: bool = False) -> list[CheckResult]:
    """Gram matrix of the order-6 basis under the dense product quadrature."""
    original = basis.radial_coefficients
    if corrupt_q:
        def corrupted(n, l):
            q = original(n, l).copy()
            if (n, l) == (2, 0):
                q[0] *= 1.001
            return q
        basis.radial_coefficients = corrupted
    t0 = time.time()
    try:
        G = gram_matrix(6, n_r=nodes, n_polar=nodes, n_theta=nodes)
    finally:
        basis.radial_coefficients = original
    elapsed = time.time() - t0
    diag = np.real(np.diag(G)).copy()
    off = G - np.diag(np.diag(G))
    max_off = float(np.abs(off).max())
    spread = float((diag.max() - diag.min()) / diag.min())
    checks = [
        _check("gram_max_offdiagonal_over_min_diagonal", max_off / diag.min(), 1e-6,
               f"{nodes}^3 nodes"),
        _check("gram_diagonal_relative_spread", spread, 1e-6,
               f"mean diagonal {diag.mean():.9f}"),
        _check("gram_runtime_seconds", elapsed, 60.0),
    ]
    return checks


# ---------------------------------------------------------------------------
# convolution oracles and rotation equivariance
# ---------------------------------------------------------------------------

def _oracle_grid():
    # exact for products of two order-6 band-limited functions
    return ball_grid(16, 20, 32)


def spatial_conv_oracle(c_f: MomentVector, g: Kernel, alphas, betas) -> np.ndarray:
    """Dense rotate-and-integrate evaluation of the convolution response."""
    th, ph, r, w = _oracle_grid()
    fvals = reconstruct(c_f, th, ph, r)
    pts = sph_to_cart(th, ph, r)
    out = np.empty(len(alphas))
    for i, (a, b) in enumerate(zip(alphas, betas)):
        R = pole_to_direction(float(a), float(b))
        tt, pp, rr = cart_to_sph(pts @ R)
        gv = reconstruct(g.base, tt, pp, np.clip(rr, 0.0, 1.0))
        out[i] = float(np.sum(w * fvals * gv))
    return out


def run_conv_oracle(seed: int = 0, n_pairs: int = 10, n_dirs: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    layout = get_layout(6)
    worst = 0.0
    for _ in range(n_pairs):
        cf = MomentVector(layout, rng.normal(size=layout.dim))
        cf.c[layout.n_entries + layout.m0_positions] = 0.0
        f = real_to_complex(cf)
        g = _random_kernel(rng, layout)
        alphas = rng.uniform(0, 2 * np.pi, n_dirs)
        betas = np.arccos(rng.uniform(-1, 1, n_dirs))
        grid = DirectionGrid(alphas, betas)
        got = conv_s2(f, g, grid).values
        want = spatial_conv_oracle(cf, g, alphas, betas)
        scale = max(float(np.abs(want).max()), 1e-12)
        worst = max(worst, float(np.abs(got - want).max()) / scale)
    return _check("conv_s2_vs_spatial_oracle_rel", worst, 1e-4,
                  f"{n_pairs} pairs x {n_dirs} directions")


def run_rotation_equivariance(seed: int = 0, n_trials: int = 20,
                              n_samples: int = 8192) -> CheckResult:
    """Rotating the input equals inversely rotating the response directions."""
    rng = np.random.default_rng(seed)
    layout = get_layout(6)
    grid = DirectionGrid.equiangular(32, 16)
    dirs = sph_to_cart(grid.alphas, grid.betas)
    worst = 0.0
    for _ in range(n_trials):
        cf = MomentVector(layout, rng.normal(size=layout.dim))
        cf.c[layout.n_entries + layout.m0_positions] = 0.0
        theta, phi, r = uniform_ball_samples(n_samples, rng)
        values = reconstruct(cf, theta, phi, r)
        g = _random_kernel(rng, layout)
        eta = random_rotation(rng)

        f = real_to_complex(fit_moments(SampleSet(theta, phi, r, values), 6))
        base = conv_s2(f, g, grid).values

        tt, pp, rr = cart_to_sph(sph_to_cart(theta, phi, r) @ eta.T)
        f_rot = real_to_complex(fit_moments(SampleSet(tt, pp, np.clip(rr, 0, 1), values), 6))
        rotated = conv_s2(f_rot, g, grid).values

        ta, tb, _ = cart_to_sph(dirs @ eta)  # eta^{-1} applied to directions
        expected = conv_s2(f, g, DirectionGrid(ta, tb)).values
        scale = max(float(np.abs(base).max()), 1e-12)
        worst = max(worst, float(np.abs(rotated - expected).max()) / scale)
    return _check("rotation_equivariance_max_rel", worst, 1e-3, f"{n_trials} random triples")


def run_spherical_oracle(seed: int = 0, n_dirs: int = 20) -> CheckResult:
    """Surface convolution spectrum against rotate-and-integrate on the sphere."""
    rng = np.random.default_rng(seed)
    lmax = 6
    pairs = [(l, m) for l in range(lmax + 1) for m in range(-l, l + 1)]
    f_hat = {}
    for l in range(lmax + 1):
        f_hat[(l, 0)] = complex(rng.normal())
        for m in range(1, l + 1):
            v = rng.normal() + 1j * rng.normal()
            f_hat[(l, m)] = v
            f_hat[(l, -m)] = (-1) ** m * np.conj(v)
    g_hat = {(l, 0): complex(rng.normal()) for l in range(lmax + 1)}
    out = spherical_conv(f_hat, g_hat)

    th, ph, w = sphere_grid(20, 32)
    fvals = np.zeros(th.size, dtype=complex)
    for (l, m), v in f_hat.items():
        fvals += v * basis.sph_harmonic(l, m, th, ph)
    gvals0 = {l: g_hat[(l, 0)] for l in range(lmax + 1)}
    pts = sph_to_cart(th, ph)
    worst = 0.0
    alphas = rng.uniform(0, 2 * np.pi, n_dirs)
    betas = np.arccos(rng.uniform(-1, 1, n_dirs))
    vals_direct = np.empty(n_dirs)
    vals_oracle = np.empty(n_dirs)
    for i, (a, b) in enumerate(zip(alphas, betas)):
        got = sum(out[(l, m)] * basis.sph_harmonic(l, m, a, b) for (l, m) in pairs)
        R = pole_to_direction(float(a), float(b))
        tt, pp, _ = cart_to_sph(pts @ R)
        g_rot = np.zeros(th.size, dtype=complex)
        for l, v in gvals0.items():
            g_rot += v * basis.sph_harmonic(l, 0, tt, pp)
        want = np.sum(w * fvals.real * g_rot.real)
        vals_direct[i] = np.real(got)
        vals_oracle[i] = want
    scale = max(float(np.abs(vals_oracle).max()), 1e-12)
    worst = float(np.abs(vals_direct - vals_oracle).max()) / scale
    return _check("spherical_conv_vs_surface_oracle_rel", worst, 1e-4, f"{n_dirs} directions")


def run_equivariance(seed: int = 0) -> list[CheckResult]:
    return [run_conv_oracle(seed), run_rotation_equivariance(seed), run_spherical_oracle(seed)]


# ---------------------------------------------------------------------------
# radial translation
# ---------------------------------------------------------------------------

def run_radial(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    layout = get_layout(6)
    shells = ShellDecomposition(10)
    grid = DirectionGrid.equiangular(16, 8)
    g = _random_kernel(rng, layout)

    # smooth pattern whose samples are contained in shell 3
    k0 = 3
    n_pts = 600
    theta = rng.uniform(0, 2 * np.pi, n_pts)
    phi = np.arccos(rng.uniform(-1, 1, n_pts))
    r = rng.uniform(0.31, 0.39, n_pts)
    pattern = MomentVector(layout, rng.normal(size=layout.dim))
    pattern.c[layout.n_entries + layout.m0_positions] = 0.0
    values = reconstruct(pattern, theta, phi, r)
    original = conv_b3(SampleSet(theta, phi, r, values), g, grid, shells)
    shifted = conv_b3(SampleSet(theta, phi, r + 1.0 / shells.n_shells, values), g, grid, shells)

    resp_scale = float(np.abs(original.values).max())
    diff = 0.0
    for k in range(shells.n_shells - 1):
        diff = max(diff, float(np.abs(shifted.values[k + 1] - original.values[k]).max()))
    checks = [
        _check("radial_shift_slice_permutation_max_abs", diff, 1e-6,
               f"response scale {resp_scale:.3g}"),
        _check("pattern_isolated_in_one_shell", float(np.abs(
            np.delete(original.values, k0, axis=0)).max()), 1e-12),
    ]

    ops = build_shell_operators(layout, shells.n_shells)
    mask = layout.m0_positions
    t0_block = ops.operators[0][np.ix_(mask, mask)]
    checks.append(_check("shell_operator_T0_identity_max_abs",
                         float(np.abs(t0_block - np.eye(len(mask))).max()), 1e-4))

    # n_shells = 1 degenerates to the plain spherical response
    truth = MomentVector(layout, rng.normal(size=layout.dim))
    truth.c[layout.n_entries + layout.m0_positions] = 0.0
    th, ph, rr = uniform_ball_samples(3000, rng)
    samples = SampleSet(th, ph, rr, reconstruct(truth, th, ph, rr))
    one = conv_b3(samples, g, grid, ShellDecomposition(1), pinv_iters=30)
    ref = conv_s2(real_to_complex(fit_moments(samples, 6)), g, grid)
    checks.append(_check("single_shell_reduces_to_surface_response",
                         float(np.abs(one.values[0] - ref.values).max()), 1e-12))
    return checks


# ---------------------------------------------------------------------------
# pseudo-inverse
# ---------------------------------------------------------------------------

def run_pinv(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(500, 100))
    P = pinv_newton_schulz(A, alpha=0.001, iters=30)
    residual = np.linalg.norm(A @ P @ A - A) / np.linalg.norm(A)
    ref = np.linalg.pinv(A)
    svd_dist = np.linalg.norm(P - ref) / np.linalg.norm(ref)

    ident = pinv_newton_schulz(np.eye(100), alpha=0.001, iters=30)
    ident_err = float(np.abs(ident - np.eye(100)).max())

    B = rng.normal(size=(200, 50))
    B[:, 7] = 0.0
    PB = pinv_newton_schulz(B, alpha=0.001, iters=10)
    zero_row = float(np.abs(PB[7]).max())
    return [
        _check("pinv_reconstruction_residual", residual, 1e-3, "500x100, alpha=0.001"),
        _check("pinv_vs_svd_relative_frobenius", svd_dist, 1e-3),
        _check("pinv_identity_max_abs_err", ident_err, 1e-6),
        _check("pinv_zero_column_row_stays_zero", zero_row, 1e-30),
    ]


# ---------------------------------------------------------------------------
# axial symmetry
# ---------------------------------------------------------------------------

def rotate_project_oracle(c_f: MomentVector, axis: Axis, rng,
                          n_samples: int = 4096) -> float:
    """Rotate the axis to the pole, re-fit, drop m != 0, Parseval power."""
    layout = c_f.layout
    theta, phi, r = uniform_ball_samples(n_samples, rng)
    values = reconstruct(c_f, theta, phi, r)
    R = pole_to_direction(axis.alpha, axis.beta)
    tt, pp, rr = cart_to_sph(sph_to_cart(theta, phi, r) @ R)
    fitted = fit_moments(SampleSet(tt, pp, np.clip(rr, 0, 1), values), layout.N)
    zonal = fitted.a[layout.m0_positions]
    return float(orthogonality_constant() * np.sum(zonal ** 2))


def run_symmetry(seed: int = 0, n_pairs: int = 100) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    layout = get_layout(6)
    worst = 0.0
    for _ in range(n_pairs):
        cf = MomentVector(layout, rng.normal(size=layout.dim))
        cf.c[layout.n_entries + layout.m0_positions] = 0.0
        axis = Axis(float(rng.uniform(0, 2 * np.pi)), float(np.arccos(rng.uniform(-1, 1))))
        got = symmetry_power(real_to_complex(cf), axis)
        want = rotate_project_oracle(cf, axis, rng)
        worst = max(worst, abs(got - want) / abs(want))
    checks = [_check("symmetry_power_vs_rotate_project_oracle_rel", worst, 1e-4,
                     f"{n_pairs} (f, axis) pairs")]

    c = np.zeros(layout.dim)
    c[layout.m0_positions] = rng.normal(size=len(layout.m0_positions))
    f_sym = real_to_complex(MomentVector(layout, c))
    pole = Axis(0.0, 0.0)
    checks.append(_check("normalized_symmetry_m0_about_pole_err",
                         abs(normalized_symmetry(f_sym, pole) - 1.0), 1e-9))

    bound_excess = 0.0
    for _ in range(50):
        f = _random_moments(rng, layout)
        ax = Axis(float(rng.uniform(0, 2 * np.pi)), float(np.arccos(rng.uniform(-1, 1))))
        bound_excess = max(bound_excess, normalized_symmetry(f, ax) - 1.0)
    checks.append(_check("normalized_symmetry_upper_bound_excess", bound_excess, 1e-9))
    return checks


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def run_gradcheck(seed: int = 0, n_coords: int = 20, h: float = 1e-4) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    cfg = network.PipelineConfig(n_kernels=4, n_shells=3, n_classes=3, batch_size=4)
    layout = get_layout(cfg.N)
    params = network.init_params(cfg, rng)
    feats = [rng.normal(size=(cfg.n_shells, layout.dim)) * 0.3 for _ in range(4)]
    labels = np.array([0, 1, 2, 1])
    _, grads = network.loss_and_grads(feats, labels, params, cfg)

    checks = []
    for name in ("kernels", "W1", "W2", "fc_w"):
        tensor = params.tensors[name]
        mask = params.masks.get(name)
        flat_idx = np.flatnonzero(mask) if mask is not None else np.arange(tensor.size)
        picks = rng.choice(flat_idx, size=min(n_coords, flat_idx.size), replace=False)
        worst = 0.0
        for j in picks:
            orig = tensor.flat[j]
            tensor.flat[j] = orig + h
            lp, _ = network.loss_and_grads(feats, labels, params, cfg)
            tensor.flat[j] = orig - h
            lm, _ = network.loss_and_grads(feats, labels, params, cfg)
            tensor.flat[j] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[name].flat[j]
            worst = max(worst, abs(an - fd) / max(abs(fd), abs(an), 1e-6))
        checks.append(_check(f"gradcheck_{name}_max_rel", worst, 1e-4,
                             f"{len(picks)} coordinates, h={h:g}"))
    return checks


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run_suites(names, seed: int = 0, corrupt_q: bool = False) -> VerifyReport:
    report = VerifyReport(seed, orthogonality_constant())
    runners = {
        "orthogonality": lambda: run_orthogonality(seed, corrupt_q=corrupt_q),
        "equivariance": lambda: run_equivariance(seed),
        "radial": lambda: run_radial(seed),
        "pinv": lambda: run_pinv(seed),
        "symmetry": lambda: run_symmetry(seed),
        "gradcheck": lambda: run_gradcheck(seed),
    }
    for name in names:
        if name not in runners:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITE_NAMES} or 'all'")
        report.suites[name] = runners[name]()
    return report
