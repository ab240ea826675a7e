"""Assembly and evaluation of the 1.5PN (Darwin) field pair.

The assembled pair is purely algebraic on top of the Newtonian run: the
density is f0 + c^-2 f2 on the shared particles, and the field is
c^-2 phi2 + c^-4 phi4.  Three evaluators live here:

* direct pairwise fields (value, time derivative, gradient) at arbitrary
  targets and times;
* matched initial data for the wave-coupled system, as a charge set for the
  homogeneous wave evolution (see :mod:`.wavedata`);
* the exterior/interior/boundary split of the same fields, where the
  interior integrates over the backward light cone at retarded times, the
  exterior over the current-time far zone, and the boundary lives on the
  sphere |z| = ct carrying initial data.  The split reproduces the direct
  evaluators up to the expansion remainder, which decays with c; measuring
  that decay order is the point of the representation tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _pairwise, _retarded
from .errors import InconsistentStateError, InsufficientHistoryError
from .history import HistoryBuffer
from .lvp import LVPState, mu2_charges
from .moments import GridSpec, MomentGrid
from .quadrature import sphere_rule
from .vp import SYM6
from .wavedata import WaveData


def project_orthogonality(positions, charges, shape_weights):
    """Remove the total and first moment of a charge set.

    The |z|-kernel sources (second time derivatives of a localized density)
    carry zero mass and zero dipole analytically; quadrature leaves small
    spurious moments that the conditionally convergent kernel amplifies.
    The correction is spread with the given nonnegative shape weights.
    """
    w = np.asarray(shape_weights, dtype=float)
    if w.sum() <= 0.0:
        return charges
    basis = np.column_stack([w, positions * w[:, None]])        # (N, 4)
    monoms = np.column_stack([np.ones(len(w)), positions])      # (N, 4)
    lam = np.linalg.solve(monoms.T @ basis, monoms.T @ charges)
    return charges - basis @ lam


def profile_sphere_integrals(bump, targets, radius, n_polar=32):
    """(integral of beta_x dS, integral of beta_x zbar dS) on |z| = radius."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    m = targets.shape[0]
    s0 = np.zeros(m)
    s1 = np.zeros((m, 3))
    if radius <= 0.0:
        return s0, s1
    omega, w = sphere_rule(n_polar)
    rnorm = np.linalg.norm(targets, axis=1)
    hit = np.abs(rnorm - radius) <= bump.space_radius
    for i in np.nonzero(hit)[0]:
        prof = bump.space_profile(targets[i] + radius * omega)
        if not prof.any():
            continue
        s0[i] = radius**2 * np.sum(w * prof)
        s1[i] = radius**2 * (w * prof) @ omega
    return s0, s1


@dataclass
class DarwinState:
    """Algebraic assembly of the Newtonian pair into the 1.5PN pair."""

    lvp: LVPState
    c: float

    @property
    def t(self) -> float:
        return self.lvp.t

    def f_values(self) -> np.ndarray:
        """Carried 1.5PN density values f0 + c^-2 f2 per particle."""
        return self.lvp.ensemble.f + self.lvp.ensemble.f2 / self.c**2

    def fields(self, targets):
        return darwin_fields(self.lvp, self.c, targets)


def assemble_darwin(lvp_state: LVPState, c: float,
                    vp_state=None) -> DarwinState:
    """Bind the base and correction solutions into the 1.5PN pair.

    The correction rides on the base particles, so a separately supplied
    base state must be the very one inside the correction state.
    """
    if vp_state is not None and vp_state is not lvp_state.vp:
        raise InconsistentStateError(
            "base and correction states do not share particles")
    if lvp_state.ensemble.f2 is None:
        raise InconsistentStateError("correction values missing")
    return DarwinState(lvp_state, float(c))


# ---------------------------------------------------------------------------
# direct evaluators
# ---------------------------------------------------------------------------

def darwin_fields(state: LVPState, c: float, targets,
                  exclude_self: bool = False):
    """(phi, dtphi, grad) of the assembled field at the targets."""
    vp = state.vp
    ens = vp.ensemble
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    m = targets.shape[0]
    if len(ens) == 0:
        return np.zeros(m), np.zeros(m), np.zeros((m, 3))
    eps2 = vp.config.softening.eps2
    w = ens.weights
    q2 = mu2_charges(ens.vol, ens.p, ens.f, ens.f2)
    flds = vp.fields
    ic2 = 1.0 / c**2
    inf = np.inf

    phi2, g2 = _pairwise.newtonian_phi_grad(targets, ens.x, w, eps2,
                                            exclude_self, 0.0, inf)
    dt2, _ = _pairwise.dtphi2_and_grad(targets, ens.x, ens.p, w, eps2,
                                       exclude_self)
    phi4 = _pairwise.phi4_value_parts(targets, ens.x, ens.p, w, q2,
                                      flds.grad, eps2, exclude_self, 0.0, inf)
    g4 = _pairwise.phi4_grad_alt(targets, ens.x, ens.p, w, q2, flds.grad,
                                 eps2, exclude_self, 0.0, inf)
    hp = np.einsum("nab,nb->na", flds.hess, ens.p)
    dt4 = _pairwise.dtphi4_value(targets, ens.x, ens.p, ens.vol, ens.f,
                                 ens.f2, w, flds.grad, hp, flds.grad_dtphi,
                                 flds.dtphi, eps2, exclude_self)
    phi = ic2 * phi2 + ic2**2 * phi4
    dtphi = ic2 * dt2 + ic2**2 * dt4
    grad = ic2 * g2 + ic2**2 * g4
    return phi, dtphi, grad


# ---------------------------------------------------------------------------
# matched initial data
# ---------------------------------------------------------------------------

def matched_wave_data(state0: LVPState, c: float) -> WaveData:
    """Initial data (u0, u1) of the wave-coupled system as a charge set.

    u0 = c^-2 phi2(0) + c^-4 phi4(0) and u1 its first time derivative, both
    realized from the t = 0 particles: 1/|z| charges carry the combined mass
    density, |z| charges the second time derivative of the density (values
    from the analytic initial bump and its radial continuum fields).  The
    c^-4 part of u1 vanishes identically for momentum-even data.
    """
    if state0.t != 0.0:
        raise InconsistentStateError("matched data must be built at t = 0")
    ens = state0.ensemble
    bump = ens.bump
    n = len(ens)
    if n == 0:
        return WaveData.zero()
    ic2 = 1.0 / c**2
    w = ens.weights
    q2 = mu2_charges(ens.vol, ens.p, ens.f, np.zeros(n))
    g_rad, hess_rad = bump.radial_fields(ens.x)
    Q2 = ens.vol * bump.dt2_f0(ens.x, ens.p, g_rad, hess_rad)
    Q2 = project_orthogonality(ens.x, Q2, w)
    dtf0 = bump.dt_f0(ens.x, ens.p, g_rad)
    aN = -ic2 * (w + ic2 * q2)
    aL = -0.5 * ic2**2 * Q2
    bN = -ic2 * ens.vol * dtf0
    bL = np.zeros(n)
    coef = -ic2 * bump.amplitude * (bump.momentum_mass
                                    - 0.5 * ic2 * bump.momentum_p2)
    return WaveData(ens.x.copy(), aN, aL, bN, bL,
                    surface_coef=coef, bump=bump)


@dataclass
class MatchedInitialData:
    wave: WaveData
    c: float

    def phi0(self, targets):
        return self.wave.fields(targets, 0.0, self.c)[0]

    def phi1(self, targets):
        return self.wave.fields(targets, 0.0, self.c)[1]


def matched_initial_data(state0: LVPState, c: float) -> MatchedInitialData:
    return MatchedInitialData(matched_wave_data(state0, c), float(c))


# ---------------------------------------------------------------------------
# exterior / interior / boundary representation
# ---------------------------------------------------------------------------

@dataclass
class RepresentationSplit:
    ext: dict
    int_: dict
    bd: dict

    def total(self, key):
        return self.ext[key] + self.int_[key] + self.bd[key]


def _exterior_sphere_terms(state: LVPState, targets, radius,
                           spec: GridSpec | None, n_polar=32):
    """Moving-sphere corrections of the exterior moment integrals.

    The exterior split of the |z|- and zbar-kernel integrals of the second
    density derivative leaves surface terms on |z| = ct built from the
    pressure tensor, its divergence, and the force-weighted density; they
    are only nonzero while the sphere cuts the support.
    """
    m = targets.shape[0]
    sph_grad = np.zeros((m, 3))
    sph_val = np.zeros(m)
    ens = state.ensemble
    if radius <= 0.0 or len(ens) == 0:
        return sph_grad, sph_val
    rt = np.linalg.norm(targets, axis=1)
    support = ens.support_radius()
    hit = np.nonzero(np.abs(rt - radius) <= support + 0.1)[0]
    if hit.size == 0:
        return sph_grad, sph_val
    spec = spec or state.vp.config.grid
    w = ens.weights
    p = ens.p
    pi_vals = np.stack([w * p[:, a] * p[:, b] for a, b in SYM6], axis=1)
    fg_vals = w[:, None] * state.vp.fields.grad
    grid = MomentGrid.deposit(spec, ens.x, np.hstack([pi_vals, fg_vals]),
                              [f"pi{a}{b}" for a, b in SYM6]
                              + ["fgx", "fgy", "fgz"])
    grid.data = grid.sharpened(grid.data, ens.x_spacing)
    sym_index = {}
    for ci, (a, b) in enumerate(SYM6):
        sym_index[a, b] = ci
        sym_index[b, a] = ci
    divpi = np.stack([
        sum(grid.derivative(grid.data[..., sym_index[comp, b]], b)
            for b in range(3)) for comp in range(3)], axis=-1)
    # build interpolators once
    interp = {
        "pi": [grid.interpolator(grid.data[..., c]) for c in range(6)],
        "fg": [grid.interpolator(grid.data[..., 6 + a]) for a in range(3)],
        "divpi": [grid.interpolator(divpi[..., a]) for a in range(3)],
    }
    omega, wq = sphere_rule(n_polar)
    for i in hit:
        pts = targets[i] + radius * omega
        pi6 = np.stack([f(pts) for f in interp["pi"]], axis=1)
        fg = np.stack([f(pts) for f in interp["fg"]], axis=1)
        dpi = np.stack([f(pts) for f in interp["divpi"]], axis=1)
        if not (pi6.any() or fg.any()):
            continue
        pi_full = np.empty((pts.shape[0], 3, 3))
        for ci, (a, b) in enumerate(SYM6):
            pi_full[:, a, b] = pi6[:, ci]
            pi_full[:, b, a] = pi6[:, ci]
        zPz = np.einsum("qa,qab,qb->q", omega, pi_full, omega)
        Pz = np.einsum("qab,qb->qa", pi_full, omega)
        zfg = np.sum(omega * fg, axis=1)
        zdp = np.sum(omega * dpi, axis=1)
        ds = wq * radius**2
        sph_grad[i] = (-(ds * zfg) @ omega
                       + (ds / radius) @ (Pz - omega * zPz[:, None])
                       - (ds * zdp) @ omega)
        sph_val[i] = np.sum(ds * zPz) - radius * np.sum(ds * zfg) \
            - radius * np.sum(ds * zdp)
    return sph_grad, sph_val


def darwin_representation(state: LVPState, history: HistoryBuffer, c: float,
                          targets, spec: GridSpec | None = None,
                          n_polar: int = 32) -> RepresentationSplit:
    """Exterior/interior/boundary split of (grad, value, dtphi) at time t.

    ``state`` must sit at the last recorded frame of ``history``; the
    interior part consumes the full history back to t = 0 (or to t - ct when
    shorter horizons suffice).
    """
    t = state.t
    if len(history) == 0 or abs(history.t_last - t) > 1e-12:
        raise InsufficientHistoryError(
            "state must coincide with the newest history frame")
    history.require_span(0.0, t)
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    m = targets.shape[0]
    ens = state.ensemble
    vp = state.vp
    eps2 = vp.config.softening.eps2
    ic2 = 1.0 / c**2
    ic4, ic5 = ic2**2, ic2**2 / c
    r = c * t
    inf = np.inf
    w = ens.weights
    q2 = mu2_charges(ens.vol, ens.p, ens.f, ens.f2)
    p2 = np.sum(ens.p**2, axis=1)
    qD = ens.vol * ((1.0 - 0.5 * ic2 * p2) * ens.f + ic2 * ens.f2)
    wD = ens.vol * (ens.f + ic2 * ens.f2)

    # exterior: current-time sources with |z| >= ct
    # the pairwise newtonian gradient is already -sum q z/s^3
    _, gext1 = _pairwise.newtonian_phi_grad(targets, ens.x, qD, eps2,
                                            False, r, inf)
    gext = ic2 * gext1
    text = _pairwise.phi4_grad_alt(targets, ens.x, ens.p, w,
                                   np.zeros(len(ens)), vp.fields.grad,
                                   eps2, False, r, inf)
    sph_grad, sph_val = _exterior_sphere_terms(state, targets, r, spec,
                                               n_polar)
    gext = gext + ic4 * (text + 0.5 * sph_grad)
    pext1, _ = _pairwise.newtonian_phi_grad(targets, ens.x,
                                            w + ic2 * q2, eps2, False, r, inf)
    l_ext = _pairwise.phi4_value_parts(targets, ens.x, ens.p, w,
                                       np.zeros(len(ens)), vp.fields.grad,
                                       eps2, False, r, inf)
    vext = ic2 * pext1 + ic4 * (l_ext - 0.5 * sph_val)
    dtext = ic2 * _pairwise.dt_lead(targets, ens.x, ens.p, wD, eps2,
                                    False, r, inf)

    # interior: light-cone crossings of the history
    if t > 0.0:
        gint, vint, dtint = _retarded.darwin_interior(
            targets, np.full(m, -1, dtype=np.int64), history.times,
            history.col("x"), history.col("p"), history.col("pdot"),
            history.col("f2"), history.col("f2dot"), history.col("dtphi2"),
            history.col("a7"), ens.vol, ens.f, t, c, eps2)
    else:
        gint = np.zeros((m, 3))
        vint = np.zeros(m)
        dtint = np.zeros(m)

    # boundary: initial-data sphere terms (momentum-even data: only the
    # second-moment pieces survive)
    gbd = np.zeros((m, 3))
    vbd = np.zeros(m)
    dtbd = np.zeros(m)
    if t > 0.0 and ens.bump is not None:
        s0, s1 = profile_sphere_integrals(ens.bump, targets, r, n_polar)
        coef = ens.bump.amplitude * ens.bump.momentum_p2 / 3.0
        gbd = -(ic5 / t) * coef * s1
        dtbd = -(ic4 / t) * coef * s0
    return RepresentationSplit(
        ext={"grad": gext, "value": vext, "dtphi": dtext},
        int_={"grad": gint, "value": vint, "dtphi": dtint},
        bd={"grad": gbd, "value": vbd, "dtphi": dtbd})
