"""Independent quadrature baselines for the closed-form kernel identities.

Everything here deliberately avoids the closed forms in :mod:`.kernels`;
these are the reference sides of the exactness tests and of the CLI
self-test, so they must stay dumb and slow.
"""
from __future__ import annotations

import numpy as np

from .quadrature import ball_rule, gauss_legendre, sphere_rule


def sphere_mean_inverse_quad(z, r, n_polar: int = 48) -> float:
    omega, w = sphere_rule(n_polar)
    z = np.asarray(z, dtype=float)
    d = np.linalg.norm(z[None, :] - r * omega, axis=1)
    return float(np.sum(w / d))


def sphere_mean_vector_quad(z, r, kind: str, n_polar: int = 48):
    omega, w = sphere_rule(n_polar)
    z = np.asarray(z, dtype=float)
    diff = z[None, :] - r * omega
    d = np.linalg.norm(diff, axis=1)
    if kind == "grad_inverse":
        vals = diff / d[:, None] ** 3
    elif kind == "linear":
        vals = diff / d[:, None]
    else:
        raise ValueError(kind)
    return w @ vals


def conv_inverse_cube_quad(z, n_radial: int = 200, n_angle: int = 80,
                           r_split: float | None = None,
                           r_cut: float = 60.0):
    """Nested quadrature of the |z-v|^-1 |v|^-3 v convolution.

    Azimuthal symmetry about the z direction reduces the integral to
    (rho, u=cos theta); the far tail is mapped to a finite interval with
    w = 1/rho.  Returns the full 3-vector in the original frame.
    """
    z = np.asarray(z, dtype=float)
    zn = float(np.linalg.norm(z))
    if zn == 0.0:
        raise ValueError("z = 0")
    if r_split is None:
        r_split = zn

    x01, w01 = np.polynomial.legendre.leggauss(n_angle)

    def shell(rho):
        # axial angular integral at radius rho; substituting d = |z - v|
        # removes the endpoint 1/sqrt singularity (integrand becomes a
        # polynomial in d)
        a, b = zn**2 + rho**2, 2.0 * zn * rho
        lo, hi = abs(zn - rho), zn + rho
        d = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x01
        wd = 0.5 * (hi - lo) * w01
        return 2.0 / b**2 * np.sum(wd * (a - d * d))

    total = 0.0
    for a, b in ((0.0, 0.5 * r_split), (0.5 * r_split, r_split),
                 (r_split, 2.0 * r_split), (2.0 * r_split, r_cut)):
        rho, wr = gauss_legendre(n_radial, a, b)
        total += sum(wr[i] * shell(rho[i]) for i in range(len(rho)))
    # tail rho in (r_cut, inf): substitute w = 1/rho
    wv, ww = gauss_legendre(n_radial, 0.0, 1.0 / r_cut)
    total += sum(ww[i] * shell(1.0 / wv[i]) / wv[i] ** 2 for i in range(len(wv)))
    return 2.0 * np.pi * total * z / zn


def uniform_ball_potential(rho0: float, radius: float, x):
    """Closed-form potential of a uniform ball (the -1/|z| convolution)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    mass = 4.0 / 3.0 * np.pi * radius**3 * rho0
    inside = -2.0 * np.pi * rho0 * (radius**2 - r**2 / 3.0)
    outside = np.where(r > 0, -mass / np.where(r > 0, r, 1.0), np.nan)
    return np.where(r <= radius, inside, outside)


def convolution_quad(density, kernel, targets, radius: float,
                     n_radial: int = 48, n_polar: int = 24):
    """Grid-free quadrature of integral kernel(|z|) density(x+z) dz.

    ``density`` maps (M, 3) points to values; ``kernel`` maps |z| to weights.
    The ball of integration must cover the support of the density shifted by
    every target.
    """
    pts, w = ball_rule(radius, n_radial, n_polar)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    kv = kernel(np.linalg.norm(pts, axis=1))
    out = np.empty(targets.shape[0])
    for i, x in enumerate(targets):
        out[i] = np.sum(w * kv * density(x + pts))
    return out
