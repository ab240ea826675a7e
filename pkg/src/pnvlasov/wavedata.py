"""Homogeneous wave evolution of matched initial field data.

The matched data of the full system is a superposition of 1/|z| and |z|
convolutions of compactly supported sources, so its Kirchhoff evolution

    u(t, x) = d/dt [ t M_{ct} u0 ](x) + t M_{ct} u1 (x)

reduces, kernel by kernel, to closed piecewise radial profiles: the sphere
mean of 1/|y - .| is 1/max(ct, |y - x|) and of |y - .| the matching
quadratic.  Each charge then contributes G(s, t) with

    G_N = t/max(ct, s)            (1/|z| charges)
    G_L = t * (ct + s^2/(3 ct))   for s <= ct, t * (s + (ct)^2/(3 s)) else,

and the field values/derivatives are plain sums of the piecewise kernel
derivatives, softened like every other pairwise kernel.  The only
distributional subtlety sits in d^2/dt^2 of the N-piece, whose a.e.
derivative misses a moving sphere term; it is restored explicitly from the
smooth density underlying the charges (the initial bump), by sphere
quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .bump import BumpSpec
from .quadrature import sphere_rule


@njit(parallel=True, fastmath=True, cache=True)
def _wave_sums(tx, y, aN, aL, bN, bL, t, c, eps2, exclude):
    m = tx.shape[0]
    n = y.shape[0]
    phi = np.zeros(m)
    dtphi = np.zeros(m)
    grad = np.zeros((m, 3))
    r = c * t
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc_p = 0.0
        acc_t = 0.0
        g0 = g1 = g2 = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = y[k, 0] - xi0
            z1 = y[k, 1] - xi1
            z2 = y[k, 2] - xi2
            s = np.sqrt(z0 * z0 + z1 * z1 + z2 * z2 + eps2)
            caN, caL, cbN, cbL = aN[k], aL[k], bN[k], bL[k]
            if s <= r:
                # interior branch: the 1/|z|-data piece has evaporated
                # (strong Huygens), only the |z|-kernel pieces survive
                acc_p += caL * 2.0 * c * t \
                    + cbN / c + cbL * (c * t * t + s * s / (3.0 * c))
                acc_t += caL * 2.0 * c + cbL * 2.0 * c * t
                gs = cbL * 2.0 * s / (3.0 * c)          # d/ds of G_L(phi1)
                fac = -gs / s
                g0 += fac * z0
                g1 += fac * z1
                g2 += fac * z2
            else:
                acc_p += caN / s + caL * (s + c * c * t * t / s) \
                    + cbN * t / s + cbL * (t * s + c * c * t**3 / (3.0 * s))
                acc_t += cbN / s + caL * 2.0 * c * c * t / s \
                    + cbL * (s + c * c * t * t / s)
                # d/ds of [aN dtG_N + aL dtG_L + bN G_N + bL G_L]
                gs = (-caN / (s * s)
                      + caL * (1.0 - c * c * t * t / (s * s))
                      - cbN * t / (s * s)
                      + cbL * (t - c * c * t**3 / (3.0 * s * s)))
                fac = -gs / s
                g0 += fac * z0
                g1 += fac * z1
                g2 += fac * z2
        phi[i] = acc_p
        dtphi[i] = acc_t
        grad[i, 0] = g0
        grad[i, 1] = g1
        grad[i, 2] = g2
    return phi, dtphi, grad


@dataclass
class WaveData:
    """Charge-set representation of initial field data (u0, u1).

    u0(x) = sum aN_k / s_k + sum aL_k s_k, and likewise u1 with (bN, bL).
    ``surface_coef`` times the bump's spatial profile is the smooth density
    underlying the aN charges; it feeds the moving-sphere terms of the time
    and space derivatives.  Without it those terms are omitted (correct a.e.
    for isolated point charges).
    """

    positions: np.ndarray
    aN: np.ndarray
    aL: np.ndarray
    bN: np.ndarray
    bL: np.ndarray
    surface_coef: float = 0.0
    bump: BumpSpec | None = None

    @classmethod
    def zero(cls) -> "WaveData":
        z = np.zeros(0)
        return cls(np.zeros((0, 3)), z, z, z, z)

    def _surface_integrals(self, targets, radius, n_polar):
        """(integral of rho dS, integral of rho zbar dS) over |z| = radius."""
        m = targets.shape[0]
        s0 = np.zeros(m)
        s1 = np.zeros((m, 3))
        if self.surface_coef == 0.0 or self.bump is None or radius <= 0.0:
            return s0, s1
        R0 = self.bump.space_radius
        omega, w = sphere_rule(n_polar)
        rnorm = np.linalg.norm(targets, axis=1)
        hit = np.abs(rnorm - radius) <= R0
        for i in np.nonzero(hit)[0]:
            prof = self.bump.space_profile(targets[i] + radius * omega)
            if not prof.any():
                continue
            s0[i] = self.surface_coef * radius**2 * np.sum(w * prof)
            s1[i] = self.surface_coef * radius**2 * (w * prof) @ omega
        return s0, s1

    def fields(self, targets, t, c, eps=0.0, n_polar: int = 32,
               exclude_self: bool = False):
        """(u, dt u, grad u) of the homogeneous wave evolution at time t."""
        targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
        m = targets.shape[0]
        if len(self.aN) == 0:
            return np.zeros(m), np.zeros(m), np.zeros((m, 3))
        phi, dtphi, grad = _wave_sums(
            targets, self.positions, self.aN, self.aL, self.bN, self.bL,
            t, c, eps * eps, exclude_self)
        if t > 0.0:
            s0, s1 = self._surface_integrals(targets, c * t, n_polar)
            dtphi = dtphi - s0 / t
            grad = grad - s1 / (c * t)
        return phi, dtphi, grad
