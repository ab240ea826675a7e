"""Quadrature rules shared by the field evaluators and the oracle suite.

Sphere rules are Gauss-Legendre in the polar cosine crossed with a uniform
azimuthal grid; this integrates smooth integrands on S^2 to near machine
precision at moderate orders and is cheap to generate on the fly.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def sphere_rule(n_polar: int = 24, n_azimuth: int | None = None):
    """Quadrature nodes/weights on the unit sphere.

    Returns ``(omega, w)`` with ``omega`` of shape (M, 3) and ``w`` of shape
    (M,) summing to 4*pi.
    """
    if n_azimuth is None:
        n_azimuth = 2 * n_polar
    u, wu = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    wphi = 2.0 * np.pi / n_azimuth
    su = np.sqrt(1.0 - u**2)
    omega = np.empty((n_polar * n_azimuth, 3))
    omega[:, 0] = np.outer(su, np.cos(phi)).ravel()
    omega[:, 1] = np.outer(su, np.sin(phi)).ravel()
    omega[:, 2] = np.outer(u, np.ones(n_azimuth)).ravel()
    w = np.outer(wu, np.full(n_azimuth, wphi)).ravel()
    return omega, w


@lru_cache(maxsize=64)
def gauss_legendre(n: int, a: float, b: float):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def sphere_mean(func, center, radius, n_polar: int = 24):
    """Mean of ``func`` over the sphere of given center and radius.

    ``func`` must accept an (M, 3) array and return (M,) or (M, d) values.
    """
    omega, w = sphere_rule(n_polar)
    vals = func(center + radius * omega)
    return np.tensordot(w, vals, axes=(0, 0)) / (4.0 * np.pi)


def sphere_integral(func, center, radius, n_polar: int = 24):
    """Surface integral of ``func`` over a sphere (includes the r^2 factor)."""
    return sphere_mean(func, center, radius, n_polar) * 4.0 * np.pi * radius**2


def ball_rule(radius: float, n_radial: int = 32, n_polar: int = 16):
    """Product rule for integrals over a solid ball centered at the origin."""
    r, wr = gauss_legendre(n_radial, 0.0, radius)
    omega, womega = sphere_rule(n_polar)
    pts = (r[:, None, None] * omega[None, :, :]).reshape(-1, 3)
    w = (wr[:, None] * r[:, None] ** 2 * womega[None, :]).ravel()
    return pts, w
