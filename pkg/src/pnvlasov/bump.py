"""Compactly supported smooth initial phase-space density.

The initial density is a product bump

    f0(x, p) = A * beta(|x|/R0) * beta(|p|/P0),
    beta(r)  = exp(1 - 1/(1 - r^2))   on [0, 1), zero outside,

which is C^infinity, nonnegative, exactly supported on B(0,R0) x B(0,P0) and
even in p.  Everything the solvers need analytically from the initial data
lives here: values, first and second phase-space derivatives, the radial
momentum moments, and the momentum-sphere reduction factors used by the
light-cone boundary terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError
from .quadrature import gauss_legendre

_EDGE = 1.0 - 1e-8


def beta_profile(r):
    """exp(1 - 1/(1 - r^2)) for r < 1, zero outside."""
    r = np.asarray(r, dtype=float)
    t = 1.0 - r * r
    safe = np.where(r < _EDGE, t, 1.0)
    val = np.where(r < _EDGE, np.exp(1.0 - 1.0 / safe), 0.0)
    return val


def _phi1(r):
    # beta'(r)/r = -2 beta / (1-r^2)^2, smooth through r = 0
    r = np.asarray(r, dtype=float)
    t = np.where(r < _EDGE, 1.0 - r * r, 1.0)
    return np.where(r < _EDGE, -2.0 * np.exp(1.0 - 1.0 / t) / t**2, 0.0)


def _phi2(r):
    # (d/dr [beta'(r)/r]) / r, smooth through r = 0
    r = np.asarray(r, dtype=float)
    t = np.where(r < _EDGE, 1.0 - r * r, 1.0)
    b = np.where(r < _EDGE, np.exp(1.0 - 1.0 / t), 0.0)
    return 4.0 * b / t**4 - 8.0 * b / t**3


@lru_cache(maxsize=16)
def _radial_moment(k: int, n: int = 400) -> float:
    """integral_0^1 beta(u) u^k du."""
    u, w = gauss_legendre(n, 0.0, 1.0)
    return float(np.sum(w * beta_profile(u) * u**k))


@dataclass(frozen=True)
class BumpSpec:
    """Parameters of the product bump initial density."""

    amplitude: float
    space_radius: float
    momentum_radius: float

    def __post_init__(self):
        if self.space_radius <= 0 or self.momentum_radius <= 0:
            raise InvalidInputError("bump radii must be positive")
        if self.amplitude < 0:
            raise InvalidInputError("bump amplitude must be nonnegative")

    @classmethod
    def with_total_mass(cls, mass: float, space_radius: float,
                        momentum_radius: float) -> "BumpSpec":
        """Choose the amplitude so the full phase-space integral equals mass."""
        i2 = _radial_moment(2)
        vol = (4.0 * np.pi) ** 2 * (space_radius * momentum_radius) ** 3 * i2**2
        return cls(mass / vol, space_radius, momentum_radius)

    # -- values and derivatives -------------------------------------------

    def value(self, x, p):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        rx = np.linalg.norm(x, axis=-1) / self.space_radius
        rp = np.linalg.norm(p, axis=-1) / self.momentum_radius
        return self.amplitude * beta_profile(rx) * beta_profile(rp)

    def space_profile(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return beta_profile(np.linalg.norm(x, axis=-1) / self.space_radius)

    def momentum_profile(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return beta_profile(np.linalg.norm(p, axis=-1) / self.momentum_radius)

    def gradients(self, x, p):
        """(grad_x f0, grad_p f0), each (N, 3)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        rx = np.linalg.norm(x, axis=-1) / self.space_radius
        rp = np.linalg.norm(p, axis=-1) / self.momentum_radius
        bx, bp = beta_profile(rx), beta_profile(rp)
        cx = self.amplitude * bp * _phi1(rx) / self.space_radius**2
        cp = self.amplitude * bx * _phi1(rp) / self.momentum_radius**2
        return cx[:, None] * x, cp[:, None] * p

    def grad6(self, x, p):
        """Phase-space gradient as a single (N, 6) array."""
        gx, gp = self.gradients(x, p)
        return np.concatenate([gx, gp], axis=1)

    def second_derivatives(self, x, p):
        """Hessian blocks (Fxx, Fxp, Fpp) of f0, shapes (N,3,3).

        Fxp[i, a, b] = d^2 f0 / dx_a dp_b.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        R2, P2 = self.space_radius**2, self.momentum_radius**2
        rx = np.linalg.norm(x, axis=-1) / self.space_radius
        rp = np.linalg.norm(p, axis=-1) / self.momentum_radius
        bx, bp = beta_profile(rx), beta_profile(rp)
        p1x, p1p = _phi1(rx), _phi1(rp)
        p2x, p2p = _phi2(rx), _phi2(rp)
        eye = np.eye(3)
        A = self.amplitude
        fxx = A * bp[:, None, None] * (
            p1x[:, None, None] / R2 * eye
            + p2x[:, None, None] / R2**2 * x[:, :, None] * x[:, None, :])
        fpp = A * bx[:, None, None] * (
            p1p[:, None, None] / P2 * eye
            + p2p[:, None, None] / P2**2 * p[:, :, None] * p[:, None, :])
        fxp = A * (p1x * p1p / (R2 * P2))[:, None, None] \
            * x[:, :, None] * p[:, None, :]
        return fxx, fxp, fpp

    def dt_f0(self, x, p, g):
        """Eulerian time derivative of the transported density at t = 0.

        g is grad of the Newtonian potential at the positions x.
        """
        gx, gp = self.gradients(x, p)
        return -np.sum(p * gx, axis=1) + np.sum(g * gp, axis=1)

    def dt2_f0(self, x, p, g, hess, gdt=None):
        """Second Eulerian time derivative at t = 0.

        hess is the (N,3,3) potential Hessian at x; gdt the gradient of the
        potential's first time derivative (identically zero for momentum-even
        data, the default).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        gx, gp = self.gradients(x, p)
        fxx, fxp, fpp = self.second_derivatives(x, p)
        grad_x_dtf = (-np.einsum("nab,nb->na", fxx, p)
                      + np.einsum("nab,nb->na", hess, gp)
                      + np.einsum("nab,nb->na", fxp, g))
        grad_p_dtf = (-gx - np.einsum("nab,na->nb", fxp, p)
                      + np.einsum("nab,nb->na", fpp, g))
        out = -np.sum(p * grad_x_dtf, axis=1) + np.sum(g * grad_p_dtf, axis=1)
        if gdt is not None:
            out = out + np.sum(gdt * gp, axis=1)
        return out

    # -- momentum moments --------------------------------------------------

    @property
    def momentum_mass(self) -> float:
        """integral beta(|p|/P0) dp."""
        return 4.0 * np.pi * self.momentum_radius**3 * _radial_moment(2)

    @property
    def momentum_p2(self) -> float:
        """integral p^2 beta(|p|/P0) dp."""
        return 4.0 * np.pi * self.momentum_radius**5 * _radial_moment(4)

    @property
    def total_mass(self) -> float:
        return self.amplitude * 4.0 * np.pi * self.space_radius**3 \
            * _radial_moment(2) * self.momentum_mass

    def radial_enclosed_mass(self, r, n: int = 200):
        """Enclosed spatial mass of the initial density inside radius r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        coef = self.amplitude * self.momentum_mass
        out = np.empty_like(r)
        for i, rr in enumerate(r):
            s, w = gauss_legendre(n, 0.0, min(rr, self.space_radius))
            prof = beta_profile(s / self.space_radius)
            out[i] = 4.0 * np.pi * coef * np.sum(w * s**2 * prof)
        return out

    def radial_fields(self, x):
        """Continuum Newtonian gradient and Hessian of the initial density.

        Valid at t = 0 only, where the spatial density is the radial profile
        amplitude * m0 * beta(|x|/R0).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        r_safe = np.where(r > 1e-12, r, 1e-12)
        M = self.radial_enclosed_mass(r_safe)
        rho = self.amplitude * self.momentum_mass \
            * beta_profile(r_safe / self.space_radius)
        g = (M / r_safe**3)[:, None] * x
        yy = x[:, :, None] * x[:, None, :] / (r_safe**2)[:, None, None]
        eye = np.eye(3)
        H = 4.0 * np.pi * rho[:, None, None] * yy \
            + (M / r_safe**3)[:, None, None] * (eye - 3.0 * yy)
        small = r <= 1e-12
        if np.any(small):
            rho0 = self.amplitude * self.momentum_mass
            g[small] = 0.0
            H[small] = (4.0 * np.pi / 3.0) * rho0 * eye
        return g, H

    def boundary_kernel_factor(self, c: float, n: int = 120) -> float:
        """integral gamma(p) (1 + zb.phat/c)^-1 beta(|p|/P0) dp.

        Independent of the unit vector zb because the profile is radial; the
        polar integral is elementary, leaving one radial quadrature.
        """
        rho, w = gauss_legendre(n, 0.0, self.momentum_radius)
        gam = 1.0 / np.sqrt(1.0 + (rho / c) ** 2)
        a = gam * rho / c
        pol = np.where(a > 1e-8, np.log((1.0 + a) / (1.0 - a)) / np.where(a > 0, a, 1.0), 2.0)
        vals = beta_profile(rho / self.momentum_radius) * gam * pol
        return float(2.0 * np.pi * np.sum(w * rho**2 * vals))
