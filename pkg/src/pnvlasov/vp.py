"""Newtonian-limit solver.

Characteristics are ``xdot = p, pdot = -grad phi2`` with the pairwise
softened 1/|z| potential of the particles themselves; carried density values
are constant along the flow.  Two extra structures ride along when requested:

* the inverse flow Jacobian ``K(t) = d(initial point)/d(current point)``,
  integrated from ``Kdot = -K A`` with the linearized force matrix A; it
  turns the analytic initial-density gradient into the phase-space gradient
  of the transported density at each particle, noise-free (no kernel
  regression anywhere);
* the co-transported first-correction values f2 (see :mod:`.lvp`), whose
  source needs those gradients.

The module also provides the moment recursion for Eulerian time derivatives
of the spatial density (grids up to third order), and the identity residuals
used as diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _pairwise
from .ensemble import ParticleEnsemble
from .errors import InvalidInputError, NotPreparedError, UnsupportedOrderError
from .moments import GridSpec, MomentGrid
from .params import PhysicalConfig

SYM6 = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
SYM6_MULT = (1, 1, 1, 2, 2, 2)
SYM10 = ((0, 0, 0), (1, 1, 1), (2, 2, 2), (0, 0, 1), (0, 0, 2),
         (0, 1, 1), (1, 1, 2), (0, 2, 2), (1, 2, 2), (0, 1, 2))
SYM10_MULT = (1, 1, 1, 3, 3, 3, 3, 3, 3, 6)


def hess_from_sym6(h6):
    h = np.empty((h6.shape[0], 3, 3))
    for c, (a, b) in enumerate(SYM6):
        h[:, a, b] = h6[:, c]
        h[:, b, a] = h6[:, c]
    return h


@dataclass
class FieldsAtParticles:
    phi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray       # (N, 3, 3)
    dtphi: np.ndarray
    grad_dtphi: np.ndarray


def fields_at(x, p, w, eps2, targets=None, exclude=None):
    """Newtonian potential, gradient, Hessian, dt phi2 and its gradient."""
    if targets is None:
        targets = x
        exclude = True if exclude is None else exclude
    phi, g, h6, dt, gdt = _pairwise.vp_full_pass(
        np.ascontiguousarray(targets), np.ascontiguousarray(x),
        np.ascontiguousarray(p), np.ascontiguousarray(w), eps2,
        bool(exclude))
    return FieldsAtParticles(phi, g, hess_from_sym6(h6), dt, gdt)


@dataclass
class VPState:
    ensemble: ParticleEnsemble
    config: PhysicalConfig
    K: np.ndarray | None = None        # (N, 6, 6) inverse flow Jacobian
    grad_f0_init: np.ndarray | None = None   # (N, 6) analytic grad f at t=0
    fields: FieldsAtParticles | None = None

    @property
    def t(self) -> float:
        return self.ensemble.time

    @classmethod
    def initial(cls, ensemble: ParticleEnsemble, config: PhysicalConfig,
                carry_jacobian: bool = False) -> "VPState":
        n = len(ensemble)
        K = np.tile(np.eye(6), (n, 1, 1)) if carry_jacobian else None
        g0 = None
        if carry_jacobian:
            if ensemble.bump is None:
                raise NotPreparedError(
                    "gradient transport needs the analytic initial density")
            g0 = ensemble.bump.grad6(ensemble.x, ensemble.p)
        state = cls(ensemble, config, K=K, grad_f0_init=g0)
        state.refresh_fields()
        return state

    def refresh_fields(self) -> None:
        self.fields = fields_at(self.ensemble.x, self.ensemble.p,
                                self.ensemble.weights,
                                self.config.softening.eps2)

    def phi2_eval(self, targets, rmin=0.0, rmax=np.inf):
        """Potential/gradient evaluator over the current sources."""
        return _pairwise.newtonian_phi_grad(
            np.ascontiguousarray(np.atleast_2d(targets), dtype=float),
            self.ensemble.x, self.ensemble.weights,
            self.config.softening.eps2, False, rmin, rmax)

    def grad_f0(self) -> tuple[np.ndarray, np.ndarray]:
        """(grad_x f0, grad_p f0) at every particle via the carried inverse
        Jacobian."""
        if self.K is None:
            raise NotPreparedError("state was built without carry_jacobian")
        g6 = np.einsum("nba,nb->na", self.K, self.grad_f0_init)
        return g6[:, :3], g6[:, 3:]


def _kdot(K, hess):
    out = np.empty_like(K)
    out[:, :, 0:3] = np.einsum("nij,njk->nik", K[:, :, 3:6], hess)
    out[:, :, 3:6] = -K[:, :, 0:3]
    return out


def vp_step(state: VPState, dt: float) -> VPState:
    """One collective RK4 step of the Newtonian characteristics."""
    if dt == 0.0:
        raise InvalidInputError("dt must be nonzero")
    ens = state.ensemble
    w = ens.weights
    eps2 = state.config.softening.eps2
    carry_k = state.K is not None

    def rhs(x, p, K):
        if carry_k:
            f = fields_at(x, p, w, eps2)
            return p, -f.grad, _kdot(K, f.hess)
        _, g = _pairwise.newtonian_phi_grad(x, x, w, eps2, True, 0.0, np.inf)
        return p, -g, None

    x0, p0, K0 = ens.x, ens.p, state.K
    kx1, kp1, kk1 = rhs(x0, p0, K0)
    kx2, kp2, kk2 = rhs(x0 + 0.5 * dt * kx1, p0 + 0.5 * dt * kp1,
                        K0 + 0.5 * dt * kk1 if carry_k else None)
    kx3, kp3, kk3 = rhs(x0 + 0.5 * dt * kx2, p0 + 0.5 * dt * kp2,
                        K0 + 0.5 * dt * kk2 if carry_k else None)
    kx4, kp4, kk4 = rhs(x0 + dt * kx3, p0 + dt * kp3,
                        K0 + dt * kk3 if carry_k else None)
    x1 = x0 + dt / 6.0 * (kx1 + 2 * kx2 + 2 * kx3 + kx4)
    p1 = p0 + dt / 6.0 * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
    K1 = K0 + dt / 6.0 * (kk1 + 2 * kk2 + 2 * kk3 + kk4) if carry_k else None
    new = replace(state, ensemble=ens.with_phase(x1, p1, ens.time + dt), K=K1)
    new.refresh_fields()
    return new


# ---------------------------------------------------------------------------
# moment recursion: Eulerian time derivatives of the spatial density
# ---------------------------------------------------------------------------

def vp_time_derivatives(state: VPState, order: int,
                        spec: GridSpec | None = None,
                        sharpen: bool = True) -> list[MomentGrid]:
    """Grids of the first ``order`` time derivatives of the spatial density.

    Time derivatives are rewritten through the transport equation as moment
    divergences plus force couplings and evaluated by deposition + grid
    differences; nothing is differenced in time.
    """
    if order < 1 or order > 3:
        raise UnsupportedOrderError("supported orders are 1..3")
    if state.fields is None:
        raise NotPreparedError("state fields not refreshed")
    spec = spec or state.config.grid
    ens = state.ensemble
    w = ens.weights
    p = ens.p
    g = state.fields.grad
    out = []

    def dep(values, names):
        grid = MomentGrid.deposit(spec, ens.x, values, names)
        if sharpen:
            grid.data = grid.sharpened(grid.data, ens.x_spacing)
        return grid

    # order 1: dt mu = -div j
    jgrid = dep(w[:, None] * p, ["jx", "jy", "jz"])
    dt1 = -sum(jgrid.derivative(jgrid.field(f"j{ax}"), a)
               for a, ax in enumerate("xyz"))
    out.append(MomentGrid(spec, dt1[..., None], ["dt1_mu"]))
    if order == 1:
        return out

    # order 2: dt2 mu = didj Pi_ij + div(mu grad phi2)
    pi_vals = np.stack([w * p[:, a] * p[:, b] for a, b in SYM6], axis=1)
    fg_vals = w[:, None] * g
    grid2 = dep(np.hstack([pi_vals, fg_vals]),
                [f"pi{a}{b}" for a, b in SYM6] + ["fgx", "fgy", "fgz"])
    dt2 = np.zeros((spec.n,) * 3)
    for c, (a, b) in enumerate(SYM6):
        dt2 += SYM6_MULT[c] * grid2.derivative(
            grid2.derivative(grid2.data[..., c], a), b)
    for a in range(3):
        dt2 += grid2.derivative(grid2.data[..., 6 + a], a)
    out.append(MomentGrid(spec, dt2[..., None], ["dt2_mu"]))
    if order == 2:
        return out

    # order 3: dt3 mu = -didjdl T3_ijl - 3 didj(g_i j_j) + div(H p + gdt)
    t3_vals = np.stack([w * p[:, a] * p[:, b] * p[:, c] for a, b, c in SYM10],
                       axis=1)
    s2_vals = np.stack([w * 0.5 * (g[:, a] * p[:, b] + g[:, b] * p[:, a])
                        for a, b in SYM6], axis=1)
    hp = np.einsum("nab,nb->na", state.fields.hess, p)
    v1_vals = w[:, None] * (hp + state.fields.grad_dtphi)
    grid3 = dep(np.hstack([t3_vals, s2_vals, v1_vals]),
                [f"t{i}" for i in range(10)] + [f"s{i}" for i in range(6)]
                + ["v1x", "v1y", "v1z"])
    dt3 = np.zeros((spec.n,) * 3)
    for c, (a, b, d) in enumerate(SYM10):
        dt3 -= SYM10_MULT[c] * grid3.derivative(
            grid3.derivative(grid3.derivative(grid3.data[..., c], a), b), d)
    for c, (a, b) in enumerate(SYM6):
        dt3 -= 3 * SYM6_MULT[c] * grid3.derivative(
            grid3.derivative(grid3.data[..., 10 + c], a), b)
    for a in range(3):
        dt3 += grid3.derivative(grid3.data[..., 16 + a], a)
    out.append(MomentGrid(spec, dt3[..., None], ["dt3_mu"]))
    return out


# ---------------------------------------------------------------------------
# identity residuals and invariants
# ---------------------------------------------------------------------------

def rad_identity_residual(state: VPState) -> np.ndarray:
    """Total self-force sum w_k grad phi2(x_k), normalized.

    Vanishes identically for the pairwise antisymmetric kernel; the returned
    vector is the floating-point residual divided by total mass times the
    force scale.
    """
    if state.fields is None:
        state.refresh_fields()
    w = state.ensemble.weights
    total = np.array([np.sum(w * state.fields.grad[:, a]) for a in range(3)])
    scale = max(np.sum(w) * np.abs(state.fields.grad).max(initial=0.0), 1e-300)
    return total / scale


def ort_residuals(state: VPState, spec: GridSpec | None = None):
    """Mass and first moment of the second time derivative of the density.

    Both vanish analytically (mass conservation and the vanishing of the
    total self-force); returned normalized by the L1 mass of the source.
    """
    grid = vp_time_derivatives(state, 2, spec)[1]
    scale = max(float(np.abs(grid.data).sum() * grid.cell_volume), 1e-300)
    extent = grid.spec.extent
    return grid.integral(0) / scale, grid.first_moment(0) / (scale * extent)


def vp_energy(state: VPState) -> float:
    """Conserved Newtonian energy: kinetic + (1/2) sum w phi2 (pairwise,
    self-excluded), the particle form of kinetic - |grad phi2|^2/(8 pi)."""
    if state.fields is None:
        state.refresh_fields()
    w = state.ensemble.weights
    kin = 0.5 * np.sum(w * np.sum(state.ensemble.p**2, axis=1))
    pot = 0.5 * np.sum(w * state.fields.phi)
    return float(kin + pot)


def dipole_moment(state: VPState) -> np.ndarray:
    return state.ensemble.weights @ state.ensemble.x
