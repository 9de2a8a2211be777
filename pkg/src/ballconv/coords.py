"""Coordinate transforms and rotations shared by the convolution and
symmetry machinery.

The pole of the spherical coordinate system is +z; a direction ``(alpha,
beta)`` means azimuth ``alpha`` and polar angle ``beta`` from the pole.
"""

from __future__ import annotations

import numpy as np


def sph_to_cart(theta, phi, r=1.0) -> np.ndarray:
    """Stack ``(..., 3)`` Cartesian coordinates from spherical ones."""
    theta, phi, r = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float), np.asarray(r, float))
    s = np.sin(phi)
    return np.stack([r * s * np.cos(theta), r * s * np.sin(theta), r * np.cos(phi)], axis=-1)


def cart_to_sph(xyz: np.ndarray):
    """Inverse of :func:`sph_to_cart`; returns ``(theta, phi, r)`` arrays.

    ``theta`` is reduced to ``[0, 2*pi)``; on the polar axis ``theta`` is 0.
    """
    xyz = np.asarray(xyz, dtype=float)
    r = np.sqrt((xyz ** 2).sum(axis=-1))
    theta = np.mod(np.arctan2(xyz[..., 1], xyz[..., 0]), 2.0 * np.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(r > 0, xyz[..., 2] / np.where(r > 0, r, 1.0), 1.0)
    phi = np.arccos(np.clip(c, -1.0, 1.0))
    return theta, phi, r


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def pole_to_direction(alpha: float, beta: float) -> np.ndarray:
    """Rotation matrix taking the +z pole to the ``(alpha, beta)`` direction.

    Any rotation with that property works for axially symmetric kernels;
    this one is ``Rz(alpha) @ Ry(beta)``.
    """
    return rotation_z(alpha) @ rotation_y(beta)


def euler_zyz(a: float, b: float, c: float) -> np.ndarray:
    """General rotation from three Euler angles (z-y-z convention)."""
    return rotation_z(a) @ rotation_y(b) @ rotation_z(c)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random rotation from three Euler angles."""
    a = rng.uniform(0.0, 2.0 * np.pi)
    b = np.arccos(rng.uniform(-1.0, 1.0))
    c = rng.uniform(0.0, 2.0 * np.pi)
    return euler_zyz(a, b, c)


def rotate_sph(R: np.ndarray, theta, phi, r):
    """Apply a rotation matrix to points given in spherical coordinates."""
    xyz = sph_to_cart(theta, phi, r)
    return cart_to_sph(xyz @ np.asarray(R).T)
