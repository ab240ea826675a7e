"""Closed-form kernel identities and static convolution evaluators.

The sphere-mean identities implemented here are the workhorses behind the
wave-data evaluators: for the 1/|z| and |z| kernels the mean over a sphere of
radius r has an elementary piecewise form in r vs |z|, with jump surfaces at
r = |z| for the differentiated variants.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _pairwise
from .errors import (
    InvalidInputError,
    OnJumpSurfaceError,
    SingularEvaluationError,
    SingularInputError,
)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class SofteningPolicy:
    """Regularization of the 1/|z|^k kernels near coincidence.

    plummer: |z| -> sqrt(|z|^2 + epsilon^2); cutoff: |z| -> max(|z|, epsilon).
    """

    epsilon: float
    mode: str = "plummer"

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise InvalidInputError("softening length must be >= 0")
        if self.mode not in ("plummer", "cutoff"):
            raise InvalidInputError(f"unknown softening mode {self.mode!r}")

    def soften(self, r):
        if self.mode == "plummer":
            return np.sqrt(r * r + self.epsilon**2)
        return np.maximum(r, self.epsilon)

    @property
    def eps2(self) -> float:
        return self.epsilon**2


def sphere_mean_inverse(z, r: float) -> float:
    """Integral of |z - r w|^-1 over unit directions w: 4 pi / max(r, |z|)."""
    if r <= 0.0:
        raise InvalidInputError("sphere radius must be positive")
    zn = np.linalg.norm(np.asarray(z, dtype=float))
    return FOUR_PI / max(r, zn)


def sphere_mean_vector(z, r: float, kind: str, jump_tol: float = 1e-12):
    """Vector sphere means of the differentiated 1/|z| and |z| kernels.

    kind="grad_inverse": integral of |z - r w|^-3 (z - r w) dw,
        0 for r > |z| and 4 pi z / |z|^3 for r < |z|.
    kind="linear": integral of |z - r w|^-1 (z - r w) dw,
        (8 pi / 3r) z for r > |z| and (4 pi - (4 pi/3) r^2/|z|^2) z/|z| else.
    """
    if r <= 0.0:
        raise InvalidInputError("sphere radius must be positive")
    z = np.asarray(z, dtype=float)
    zn = np.linalg.norm(z)
    if abs(r - zn) <= jump_tol * max(r, zn):
        raise OnJumpSurfaceError(f"r = |z| = {r} is a jump surface of {kind}")
    if kind == "grad_inverse":
        if r > zn:
            return np.zeros(3)
        return FOUR_PI * z / zn**3
    if kind == "linear":
        if r > zn:
            return (2.0 * FOUR_PI / (3.0 * r)) * z
        return (FOUR_PI - FOUR_PI / 3.0 * r**2 / zn**2) * z / zn
    raise InvalidInputError(f"unknown kind {kind!r}")


def conv_inverse_cube(z):
    """Integral of |z - v|^-1 |v|^-3 v dv over R^3: equals 2 pi z/|z|."""
    z = np.asarray(z, dtype=float)
    zn = np.linalg.norm(z)
    if zn == 0.0:
        raise SingularInputError("convolution undefined at z = 0")
    return 2.0 * np.pi * z / zn


def _resolve_sources(moments):
    """Accept a MomentGrid, ParticleEnsemble, or (positions, charges) pair."""
    if isinstance(moments, tuple):
        pos, q = moments
        return np.ascontiguousarray(pos, dtype=float), np.ascontiguousarray(q, dtype=float)
    if hasattr(moments, "node_positions"):
        return moments.node_positions(), moments.node_charges()
    if hasattr(moments, "positions"):
        return moments.positions, moments.weights
    raise InvalidInputError(f"cannot interpret source container {type(moments)!r}")


def newtonian_potential(moments, targets, softening: SofteningPolicy,
                        exclude_self: bool = False, rmin: float = 0.0,
                        rmax: float = np.inf):
    """Pairwise 1/|z| potential and gradient at the targets.

    phi(x) = -sum_k m_k / s_k,  grad phi(x) = -sum_k m_k z_k / s_k^3 with
    z_k = y_k - x and s the softened distance.  rmin/rmax restrict sources to
    a radial window around each target (exterior/interior splits).
    """
    src_x, src_w = _resolve_sources(moments)
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    if src_x.shape[0] == 0:
        return np.zeros(targets.shape[0]), np.zeros((targets.shape[0], 3))
    if softening.epsilon == 0.0:
        d2 = ((targets[:, None, :] - src_x[None, :, :]) ** 2).sum(-1)
        if exclude_self:
            np.fill_diagonal(d2, np.inf)
        if np.any(d2 == 0.0):
            raise SingularEvaluationError("target coincides with unsoftened source")
    return _pairwise.newtonian_phi_grad(targets, src_x, src_w,
                                        softening.eps2, exclude_self,
                                        rmin, rmax)


def newtonian_hessian(moments, targets, softening: SofteningPolicy,
                      exclude_self: bool = False):
    """Potential, gradient and Hessian of the pairwise 1/|z| potential."""
    src_x, src_w = _resolve_sources(moments)
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    if src_x.shape[0] == 0:
        m = targets.shape[0]
        return np.zeros(m), np.zeros((m, 3)), np.zeros((m, 3, 3))
    return _pairwise.newtonian_phi_grad_hess(targets, src_x, src_w,
                                             softening.eps2, exclude_self)


def linear_kernel_potential(time_deriv_density, targets,
                            softening: SofteningPolicy | None = None,
                            check_orthogonality: bool = True):
    """-(1/2) sum q_k s_k: the |z| kernel applied to a signed source.

    The source should integrate to zero with vanishing first moments (it
    represents a double time derivative of a localized density); this is
    checked and warned about, never enforced.
    """
    src_x, src_q = _resolve_sources(time_deriv_density)
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    if src_x.shape[0] == 0:
        return np.zeros(targets.shape[0])
    if check_orthogonality:
        total = abs(src_q.sum())
        dipole = np.linalg.norm(src_q @ src_x)
        scale = np.abs(src_q).sum() + 1e-300
        extent = max(1.0, np.abs(src_x).max())
        if total / scale > 1e-6 or dipole / (scale * extent) > 1e-6:
            warnings.warn(
                "linear-kernel source violates the zero-mass/zero-dipole "
                f"orthogonality (mass {total/scale:.2e}, dipole "
                f"{dipole/(scale*extent):.2e}); evaluating anyway",
                stacklevel=2)
    eps2 = 0.0 if softening is None else softening.eps2
    val, _ = _pairwise.linear_potential(targets, src_x, src_q, eps2,
                                        0.0, np.inf)
    return -0.5 * val


def linear_kernel_gradient(time_deriv_density, targets,
                           softening: SofteningPolicy | None = None):
    """Gradient of the -(1/2)|z| convolution: +(1/2) sum q_k z_k / s_k."""
    src_x, src_q = _resolve_sources(time_deriv_density)
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    if src_x.shape[0] == 0:
        return np.zeros((targets.shape[0], 3))
    eps2 = 0.0 if softening is None else softening.eps2
    _, grad = _pairwise.linear_potential(targets, src_x, src_q, eps2,
                                         0.0, np.inf)
    return -0.5 * grad
