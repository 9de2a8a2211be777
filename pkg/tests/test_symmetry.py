"""Axial symmetry: closed form vs rotate-project oracle, bounds, descriptor."""

from math import pi

import numpy as np
import pytest

from ballconv.layout import get_layout
from ballconv.moments import MomentVector, real_to_complex
from ballconv.symmetry import (
    TETRAHEDRAL_AXES,
    Axis,
    axis_scan,
    normalized_symmetry,
    symmetry_descriptor,
    symmetry_power,
)
from ballconv.quadrature import orthogonality_constant
from ballconv.verify import rotate_project_oracle

from conftest import random_complex_moments, random_real_moments


def m0_only_moments(rng, N=6):
    layout = get_layout(N)
    c = np.zeros(layout.dim)
    c[layout.m0_positions] = rng.normal(size=len(layout.m0_positions))
    return MomentVector(layout, c)


class TestSymmetryPower:
    def test_zero_function(self):
        layout = get_layout(6)
        f = real_to_complex(MomentVector(layout, np.zeros(layout.dim)))
        assert symmetry_power(f, Axis(0.3, 1.0)) == 0.0

    def test_m0_content_about_pole_keeps_all_power(self, rng):
        c = m0_only_moments(rng)
        f = real_to_complex(c)
        got = symmetry_power(f, Axis(0.0, 0.0))
        want = orthogonality_constant() * f.total_power()
        assert got == pytest.approx(want, rel=1e-12)

    def test_rotate_project_oracle_agreement(self, rng):
        for _ in range(8):
            c = random_real_moments(rng)
            axis = Axis(float(rng.uniform(0, 2 * pi)), float(np.arccos(rng.uniform(-1, 1))))
            got = symmetry_power(real_to_complex(c), axis)
            want = rotate_project_oracle(c, axis, rng)
            assert got == pytest.approx(want, rel=1e-4)

    def test_pure_m2_content_vanishes_at_pole(self):
        layout = get_layout(6)
        c = np.zeros(layout.dim)
        c[layout.a_index(2, 2, 2)] = 1.0   # Re Z_{2,2,2}: only m = +-2 content
        f = real_to_complex(MomentVector(layout, c))
        assert symmetry_power(f, Axis(0.0, 0.0)) < 1e-18

    def test_adding_m_nonzero_content_is_invisible_at_pole(self, rng):
        base = m0_only_moments(rng)
        layout = base.layout
        extra = base.c.copy()
        extra[layout.a_index(3, 3, 2)] = 2.0
        extra[layout.n_entries + layout.a_index(4, 4, 1)] = -1.5
        pole = Axis(0.0, 0.0)
        p0 = symmetry_power(real_to_complex(base), pole)
        p1 = symmetry_power(real_to_complex(MomentVector(layout, extra)), pole)
        assert p1 == pytest.approx(p0, rel=1e-12)
        assert real_to_complex(MomentVector(layout, extra)).total_power() > \
            real_to_complex(base).total_power()


class TestNormalizedSymmetry:
    def test_unit_for_symmetric_function_about_pole(self, rng):
        f = real_to_complex(m0_only_moments(rng))
        assert abs(normalized_symmetry(f, Axis(0.0, 0.0)) - 1.0) < 1e-9

    def test_zero_for_pure_m2_about_pole(self):
        layout = get_layout(6)
        c = np.zeros(layout.dim)
        c[layout.a_index(2, 2, 2)] = 1.0
        f = real_to_complex(MomentVector(layout, c))
        assert normalized_symmetry(f, Axis(0.0, 0.0)) < 1e-9

    def test_rotation_covariance(self, rng):
        # a pole-symmetric function, spatially rotated to axis v, is
        # symmetric about v (fit error budget)
        from ballconv.coords import cart_to_sph, pole_to_direction, sph_to_cart
        from ballconv.moments import SampleSet, fit_moments, reconstruct
        from ballconv.quadrature import uniform_ball_samples

        c = m0_only_moments(rng)
        axis = Axis(1.1, 0.8)
        theta, phi, r = uniform_ball_samples(6000, rng)
        values = reconstruct(c, theta, phi, r)
        R = pole_to_direction(axis.alpha, axis.beta)
        tt, pp, rr = cart_to_sph(sph_to_cart(theta, phi, r) @ R.T)
        rotated = fit_moments(SampleSet(tt, pp, np.clip(rr, 0, 1), values), 6)
        val = normalized_symmetry(real_to_complex(rotated), axis)
        assert abs(val - 1.0) < 1e-3

    def test_bounds(self, rng):
        for _ in range(30):
            f = random_complex_moments(rng)
            axis = Axis(float(rng.uniform(0, 2 * pi)), float(np.arccos(rng.uniform(-1, 1))))
            v = normalized_symmetry(f, axis)
            assert 0.0 <= v <= 1.0 + 1e-9

    def test_zero_norm_rejected(self):
        layout = get_layout(6)
        f = real_to_complex(MomentVector(layout, np.zeros(layout.dim)))
        with pytest.raises(ValueError, match="zero"):
            normalized_symmetry(f, Axis(0.0, 0.0))


class TestDescriptor:
    def test_sphere_symmetric_function_is_all_ones(self, rng):
        layout = get_layout(6)
        c = np.zeros(layout.dim)
        for n in (0, 2, 4, 6):
            c[layout.a_index(n, 0, 0)] = rng.normal()
        f = real_to_complex(MomentVector(layout, c))
        d = symmetry_descriptor(f)
        assert d.shape == (4,)
        assert np.allclose(d, 1.0, atol=1e-9)

    def test_zero_function_raises(self):
        layout = get_layout(6)
        f = real_to_complex(MomentVector(layout, np.zeros(layout.dim)))
        with pytest.raises(ValueError):
            symmetry_descriptor(f)

    def test_componentwise_consistency(self, rng):
        f = random_complex_moments(rng)
        axes = [Axis(a, b) for a, b in TETRAHEDRAL_AXES]
        d = symmetry_descriptor(f, axes)
        for i, ax in enumerate(axes):
            assert d[i] == normalized_symmetry(f, ax)

    def test_empty_axes_rejected(self, rng):
        with pytest.raises(ValueError):
            symmetry_descriptor(random_complex_moments(rng), [])

    def test_axis_scan_shape(self, rng):
        axes, values = axis_scan(random_complex_moments(rng), n_azimuth=4, n_polar=2)
        assert len(axes) == 8 and values.shape == (8,)
        assert np.all((values >= 0) & (values <= 1 + 1e-9))

    def test_tetrahedral_axes_are_equiangular(self):
        from ballconv.coords import sph_to_cart

        dirs = np.array([sph_to_cart(a, b) for a, b in TETRAHEDRAL_AXES])
        dots = dirs @ dirs.T
        off = dots[~np.eye(4, dtype=bool)]
        assert np.allclose(off, -1.0 / 3.0, atol=1e-12)
