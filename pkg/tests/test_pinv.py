"""Iterative pseudo-inverse: convergence, oracle agreement, structure."""

import numpy as np
import pytest

from ballconv.moments import estimate_spectral_radius, pinv_newton_schulz


def test_identity_matrix():
    P = pinv_newton_schulz(np.eye(100), alpha=0.001, iters=30)
    assert np.abs(P - np.eye(100)).max() < 1e-6


def test_zero_column_gives_zero_row_at_every_iterate():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(80, 30))
    A[:, 11] = 0.0
    for iters in (0, 1, 2, 5, 12):
        P = pinv_newton_schulz(A, alpha=0.001, iters=iters)
        assert np.all(P[11] == 0.0)


def test_random_tall_matrix_matches_svd_oracle():
    rng = np.random.default_rng(42)
    A = rng.normal(size=(500, 100))
    P = pinv_newton_schulz(A, alpha=0.001, iters=30)
    residual = np.linalg.norm(A @ P @ A - A) / np.linalg.norm(A)
    assert residual < 1e-3
    ref = np.linalg.pinv(A)
    assert np.linalg.norm(P - ref) / np.linalg.norm(ref) < 1e-3


def test_residual_non_increasing_after_three_iterations():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(300, 60))
    norm_a = np.linalg.norm(A)
    residuals = []
    for iters in range(1, 16):
        P = pinv_newton_schulz(A, alpha=0.001, iters=iters)
        residuals.append(np.linalg.norm(A @ P @ A - A) / norm_a)
    # non-increasing up to the roundoff floor the sequence settles on
    for prev, nxt in zip(residuals[2:], residuals[3:]):
        assert nxt <= prev * (1 + 1e-12) + 1e-15


def test_alpha_bound_checked():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(200, 50))
    rho = estimate_spectral_radius(A)
    with pytest.raises(ValueError, match="spectral bound"):
        pinv_newton_schulz(A, alpha=2.5 / rho, iters=5)
    with pytest.raises(ValueError, match="spectral bound"):
        pinv_newton_schulz(A, alpha=-0.1, iters=5)


def test_spectral_radius_estimate_close():
    rng = np.random.default_rng(9)
    A = rng.normal(size=(200, 40))
    est = estimate_spectral_radius(A)
    true = np.linalg.svd(A, compute_uv=False)[0] ** 2
    assert est <= true * (1 + 1e-9)
    assert est > 0.9 * true


def test_minimum_norm_solution_for_wide_system():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(20, 60))
    P = pinv_newton_schulz(A, alpha=0.0005, iters=40)
    ref = np.linalg.pinv(A)
    assert np.linalg.norm(P - ref) / np.linalg.norm(ref) < 1e-6
