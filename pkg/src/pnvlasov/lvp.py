"""Linearized correction solver: co-transport of f2 on Newtonian characteristics.

The correction density f2 obeys the same transport operator as the base
density plus sources built from the base solution, so it rides on the same
particles: no second flow, and the correction values start at exactly zero.
The coupling term grad(phi4) . grad_p f0 is applied inside the integrator
with phi4 refreshed from the stage values of f2 at every RK4 stage.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _pairwise
from .ensemble import ParticleEnsemble
from .errors import NotPreparedError
from .history import HistoryBuffer
from .kernels import linear_kernel_gradient, linear_kernel_potential
from .moments import GridSpec, MomentGrid
from .params import PhysicalConfig
from .vp import VPState, fields_at, vp_time_derivatives, _kdot


@dataclass
class LVPState:
    vp: VPState

    @property
    def ensemble(self) -> ParticleEnsemble:
        return self.vp.ensemble

    @property
    def f2(self) -> np.ndarray:
        return self.vp.ensemble.f2

    @property
    def t(self) -> float:
        return self.vp.t

    @classmethod
    def initial(cls, ensemble: ParticleEnsemble, config: PhysicalConfig) -> "LVPState":
        if ensemble.f2 is None:
            ensemble.f2 = np.zeros(len(ensemble))
        if np.any(ensemble.f2 != 0.0) and ensemble.time == 0.0:
            raise NotPreparedError("correction values must start at zero")
        return cls(VPState.initial(ensemble, config, carry_jacobian=True))


def mu2_charges(vol, p, f0, f2) -> np.ndarray:
    """Particle charges of the correction source density f2 - p^2 f0 / 2."""
    return vol * (f2 - 0.5 * np.sum(p**2, axis=1) * f0)


def _sources(x, p, f0, f2, K, g0init, fields):
    """Right-hand side of the correction transport equation (without the
    phi4 coupling), plus the phase-space gradients it needs."""
    g6 = np.einsum("nba,nb->na", K, g0init)
    gxf0, gpf0 = g6[:, :3], g6[:, 3:]
    p2 = np.sum(p**2, axis=1)
    stilde = fields.dtphi + np.sum(p * fields.grad, axis=1)
    src = (4.0 * f0 * stilde
           + 0.5 * p2 * np.sum(p * gxf0, axis=1)
           + np.sum((stilde[:, None] * p - 0.5 * p2[:, None] * fields.grad)
                    * gpf0, axis=1))
    return src, gpf0


def lvp_source(state: LVPState, particle_index=None):
    """Source term of the correction equation at the current time.

    Excludes the phi4 coupling (that term sits with the transport operator
    and is added by the integrator).
    """
    vp = state.vp
    if vp.fields is None or vp.K is None:
        raise NotPreparedError("source needs refreshed fields and Jacobians")
    ens = vp.ensemble
    src, _ = _sources(ens.x, ens.p, ens.f, ens.f2, vp.K, vp.grad_f0_init,
                      vp.fields)
    return src if particle_index is None else float(src[particle_index])


def _phi4_grad_pairwise(targets, x, p, vol, f0, f2, w, g, eps2, exclude):
    q2 = mu2_charges(vol, p, f0, f2)
    return _pairwise.phi4_grad_alt(
        np.ascontiguousarray(targets), x, p, w, q2, g, eps2, exclude,
        0.0, np.inf)


def lvp_step(state: LVPState, dt: float) -> LVPState:
    """Coupled RK4 step of positions, momenta, inverse Jacobians and f2."""
    vp = state.vp
    ens = vp.ensemble
    vol, f0, w = ens.vol, ens.f, ens.weights
    eps2 = vp.config.softening.eps2
    g0init = vp.grad_f0_init

    def rhs(x, p, K, f2):
        flds = fields_at(x, p, w, eps2)
        src, gpf0 = _sources(x, p, f0, f2, K, g0init, flds)
        gphi4 = _phi4_grad_pairwise(x, x, p, vol, f0, f2, w, flds.grad,
                                    eps2, True)
        df2 = src + np.sum(gphi4 * gpf0, axis=1)
        return p, -flds.grad, _kdot(K, flds.hess), df2

    x0, p0, K0, f20 = ens.x, ens.p, vp.K, ens.f2
    k1 = rhs(x0, p0, K0, f20)
    k2 = rhs(x0 + 0.5 * dt * k1[0], p0 + 0.5 * dt * k1[1],
             K0 + 0.5 * dt * k1[2], f20 + 0.5 * dt * k1[3])
    k3 = rhs(x0 + 0.5 * dt * k2[0], p0 + 0.5 * dt * k2[1],
             K0 + 0.5 * dt * k2[2], f20 + 0.5 * dt * k2[3])
    k4 = rhs(x0 + dt * k3[0], p0 + dt * k3[1],
             K0 + dt * k3[2], f20 + dt * k3[3])

    def comb(i, y0):
        return y0 + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])

    ens2 = replace(ens, x=comb(0, x0), p=comb(1, p0), f2=comb(3, f20),
                   time=ens.time + dt)
    new_vp = replace(vp, ensemble=ens2, K=comb(2, K0))
    new_vp.refresh_fields()
    return LVPState(new_vp)


def phi4_evaluate(state: LVPState, targets, mode: str = "grid",
                  dt2_grid: MomentGrid | None = None,
                  spec: GridSpec | None = None):
    """Correction potential and gradient at the targets.

    mode="grid": 1/|z| potential of the particle correction charges plus the
    |z| kernel applied to the deposited second time derivative of the density
    (the defining composition).  mode="pairwise": the partially integrated
    form, entirely particle sums, used as the independent cross-check
    pathway.
    """
    vp = state.vp
    if vp.fields is None:
        raise NotPreparedError("fields not refreshed")
    ens = vp.ensemble
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    eps2 = vp.config.softening.eps2
    q2 = mu2_charges(ens.vol, ens.p, ens.f, ens.f2)
    if mode == "pairwise":
        gxf0, gpf0 = vp.grad_f0()
        dtf0 = -np.sum(ens.p * gxf0, axis=1) \
            + np.sum(vp.fields.grad * gpf0, axis=1)
        vals = _pairwise.phi4_value_alt(targets, ens.x, ens.p, q2,
                                        ens.vol * dtf0, eps2, False,
                                        0.0, np.inf)
        grads = _phi4_grad_pairwise(targets, ens.x, ens.p, ens.vol, ens.f,
                                    ens.f2, ens.weights, vp.fields.grad,
                                    eps2, False)
        return vals, grads
    if mode != "grid":
        raise ValueError(f"unknown mode {mode!r}")
    if dt2_grid is None:
        dt2_grid = vp_time_derivatives(vp, 2, spec)[1]
    pm, gm = _pairwise.newtonian_phi_grad(targets, ens.x, q2, eps2, False,
                                          0.0, np.inf)
    vals = pm + linear_kernel_potential(dt2_grid, targets,
                                        check_orthogonality=False)
    grads = gm + linear_kernel_gradient(dt2_grid, targets)
    return vals, grads


# ---------------------------------------------------------------------------
# run driver: the Newtonian pair (base + correction) with history recording
# ---------------------------------------------------------------------------

def record_frame(history: HistoryBuffer, state: LVPState) -> None:
    """Append the per-particle columns the retarded evaluators need."""
    vp = state.vp
    ens = vp.ensemble
    flds = vp.fields
    src, gpf0 = _sources(ens.x, ens.p, ens.f, ens.f2, vp.K, vp.grad_f0_init,
                         flds)
    gphi4 = _phi4_grad_pairwise(ens.x, ens.x, ens.p, ens.vol, ens.f, ens.f2,
                                ens.weights, flds.grad,
                                vp.config.softening.eps2, True)
    f2dot = src + np.sum(gphi4 * gpf0, axis=1)
    a7 = flds.grad_dtphi + np.einsum("nab,nb->na", flds.hess, ens.p)
    history.append(ens.time, x=ens.x, p=ens.p, pdot=-flds.grad,
                   f2=ens.f2, f2dot=f2dot, dtphi2=flds.dtphi, a7=a7)


def run_lvp(ensemble: ParticleEnsemble, config: PhysicalConfig,
            n_steps: int | None = None, record: bool = True,
            callback=None):
    """March the coupled base+correction system over the horizon.

    Returns (final LVPState, HistoryBuffer).  The history records frames at
    every step boundary including t = 0.
    """
    state = LVPState.initial(ensemble, config)
    history = HistoryBuffer()
    if record:
        record_frame(history, state)
    if callback is not None:
        callback(state)
    steps = config.n_steps if n_steps is None else n_steps
    for _ in range(steps):
        state = lvp_step(state, config.dt)
        if record:
            record_frame(history, state)
        if callback is not None:
            callback(state)
    return state, history
