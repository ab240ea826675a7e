"""Light-cone (retarded) particle summation kernels.

Every interior integral over the backward cone ``|z| <= c (t - s)`` of a
particle-borne density reduces to a sum over cone crossings: for each
(target, source) pair the unique retarded time ``s*`` with
``|x_k(s*) - x| = c (t - s*)`` is bracketed by binary search over the stored
frames and refined by bisection on the cubic Hermite interpolant of the
trajectory.  Each crossing contributes with the retardation Jacobian
``1/(1 + zb . v/c)`` from the delta-function change of variables, ``v`` the
trajectory velocity at ``s*``.

Histories arrive as packed (F, N, ...) arrays; column meanings differ
between the Newtonian-pair history (velocity = p) and the wave-coupled one
(velocity = relativistic phat), so each consumer has its own kernel.
"""
import numpy as np
from numba import njit, prange


@njit(cache=True, fastmath=True)
def _hermite(y0, y1, d0, d1, h, u):
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return h00 * y0 + h10 * d0 * h + h01 * y1 + h11 * d1 * h


@njit(cache=True, fastmath=True)
def _cross_dist2(times, X, XD, k, j, u, xi0, xi1, xi2):
    h = times[j + 1] - times[j]
    d0 = _hermite(X[j, k, 0], X[j + 1, k, 0], XD[j, k, 0], XD[j + 1, k, 0], h, u) - xi0
    d1 = _hermite(X[j, k, 1], X[j + 1, k, 1], XD[j, k, 1], XD[j + 1, k, 1], h, u) - xi1
    d2 = _hermite(X[j, k, 2], X[j + 1, k, 2], XD[j, k, 2], XD[j + 1, k, 2], h, u) - xi2
    return d0 * d0 + d1 * d1 + d2 * d2


@njit(cache=True, fastmath=True)
def _find_crossing(times, X, XD, k, t_eval, c, xi0, xi1, xi2):
    """Retarded time for source k and target (t_eval, xi).

    Returns (found, j, u) with the frame index and in-frame fraction.
    The crossing function g(s) = |x_k(s) - xi| - c (t_eval - s) is strictly
    increasing; no crossing exists when g(t0) >= 0 (source outside the cone
    already at the earliest frame).
    """
    nf = len(times)
    d0 = X[0, k, 0] - xi0
    d1 = X[0, k, 1] - xi1
    d2 = X[0, k, 2] - xi2
    g0 = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2) - c * (t_eval - times[0])
    if g0 >= 0.0:
        return False, 0, 0.0
    # frame-level binary search for the sign change
    lo, hi = 0, nf - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        dm0 = X[mid, k, 0] - xi0
        dm1 = X[mid, k, 1] - xi1
        dm2 = X[mid, k, 2] - xi2
        gm = np.sqrt(dm0 * dm0 + dm1 * dm1 + dm2 * dm2) - c * (t_eval - times[mid])
        if gm < 0.0:
            lo = mid
        else:
            hi = mid
    # bisection on the Hermite interpolant inside [t_lo, t_hi]
    j = lo
    ulo, uhi = 0.0, 1.0
    h = times[j + 1] - times[j]
    for _ in range(30):
        um = 0.5 * (ulo + uhi)
        s = times[j] + um * h
        gm = np.sqrt(_cross_dist2(times, X, XD, k, j, um, xi0, xi1, xi2)) \
            - c * (t_eval - s)
        if gm < 0.0:
            ulo = um
        else:
            uhi = um
    return True, j, 0.5 * (ulo + uhi)


@njit(cache=True, fastmath=True)
def _interp3(A, AD, j, k, h, u, out):
    for a in range(3):
        out[a] = _hermite(A[j, k, a], A[j + 1, k, a], AD[j, k, a],
                          AD[j + 1, k, a], h, u)


@njit(parallel=True, fastmath=True, cache=True)
def darwin_interior(targets, target_src, times, X, P, PDOT, F2, F2DOT,
                    DTPHI2, A7, vol, f0, t_eval, c, eps2):
    """Interior (light-cone) parts of the 1.5PN field representation.

    Returns (grad (M,3), value (M,), dtphi (M,)) summed over cone crossings
    of the Newtonian-pair history.  target_src[i] >= 0 excludes that source
    index (self-field) for target i.
    """
    m = targets.shape[0]
    n = X.shape[1]
    grad = np.zeros((m, 3))
    val = np.zeros(m)
    dtv = np.zeros(m)
    ic = 1.0 / c
    ic2, ic3 = ic * ic, ic * ic * ic
    ic4, ic5 = ic2 * ic2, ic2 * ic3
    for i in prange(m):
        xi0, xi1, xi2 = targets[i, 0], targets[i, 1], targets[i, 2]
        excl = target_src[i]
        g0 = g1 = g2 = 0.0
        av = 0.0
        at = 0.0
        pk = np.empty(3)
        gk = np.empty(3)
        a7k = np.empty(3)
        for k in range(n):
            if k == excl:
                continue
            ok, j, u = _find_crossing(times, X, P, k, t_eval, c,
                                      xi0, xi1, xi2)
            if not ok:
                continue
            h = times[j + 1] - times[j]
            z0 = _hermite(X[j, k, 0], X[j + 1, k, 0], P[j, k, 0],
                          P[j + 1, k, 0], h, u) - xi0
            z1 = _hermite(X[j, k, 1], X[j + 1, k, 1], P[j, k, 1],
                          P[j + 1, k, 1], h, u) - xi1
            z2 = _hermite(X[j, k, 2], X[j + 1, k, 2], P[j, k, 2],
                          P[j + 1, k, 2], h, u) - xi2
            _interp3(P, PDOT, j, k, h, u, pk)
            f2k = _hermite(F2[j, k], F2[j + 1, k], F2DOT[j, k],
                           F2DOT[j + 1, k], h, u)
            # linear interpolation for the recorded field columns
            for a in range(3):
                gk[a] = -((1 - u) * PDOT[j, k, a] + u * PDOT[j + 1, k, a])
                a7k[a] = (1 - u) * A7[j, k, a] + u * A7[j + 1, k, a]
            dtp2 = (1 - u) * DTPHI2[j, k] + u * DTPHI2[j + 1, k]
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            zb0, zb1, zb2 = z0 / s, z1 / s, z2 / s
            pu = zb0 * pk[0] + zb1 * pk[1] + zb2 * pk[2]
            pp = pk[0] * pk[0] + pk[1] * pk[1] + pk[2] * pk[2]
            D = 1.0 + pu * ic
            wD = vol[k] * (f0[k] + ic2 * f2k) / D
            wN = vol[k] * f0[k] / D
            # value: -c^-2 |z|^-1 f^D
            av -= ic2 * wD / s
            # time derivative: three kernels
            zg = zb0 * gk[0] + zb1 * gk[1] + zb2 * gk[2]
            at += wD * (ic2 * pu / s2 + ic3 * (pp - 2.0 * pu * pu) / s2
                        - ic3 * zg / s)
            # gradient: seven kernels
            stl = dtp2 + pk[0] * gk[0] + pk[1] * gk[1] + pk[2] * gk[2]
            cA = -ic2 * wD / s2
            cB = ic3 * wD / s2
            cC = ic4 * wD / s2
            cD = -ic4 * wD / s
            cE = ic5 * wD / s2
            cF = ic5 * wD / s
            cG = -(1.0 / 3.0) * ic5 * wN
            u2 = pu * pu
            g0 += (cA * zb0 + cB * (2 * pu * zb0 - pk[0])
                   + cC * (-3 * u2 * zb0 + pu * pk[0] + 1.5 * pp * zb0)
                   + cD * zb0 * zg
                   + cE * (4 * u2 * pu * zb0 - u2 * pk[0]
                           - 4 * pu * pp * zb0 + pp * pk[0])
                   + cF * zb0 * (2 * pu * zg - (pk[0] * gk[0] + pk[1] * gk[1]
                                                + pk[2] * gk[2]) - stl)
                   + cG * a7k[0])
            g1 += (cA * zb1 + cB * (2 * pu * zb1 - pk[1])
                   + cC * (-3 * u2 * zb1 + pu * pk[1] + 1.5 * pp * zb1)
                   + cD * zb1 * zg
                   + cE * (4 * u2 * pu * zb1 - u2 * pk[1]
                           - 4 * pu * pp * zb1 + pp * pk[1])
                   + cF * zb1 * (2 * pu * zg - (pk[0] * gk[0] + pk[1] * gk[1]
                                                + pk[2] * gk[2]) - stl)
                   + cG * a7k[1])
            g2 += (cA * zb2 + cB * (2 * pu * zb2 - pk[2])
                   + cC * (-3 * u2 * zb2 + pu * pk[2] + 1.5 * pp * zb2)
                   + cD * zb2 * zg
                   + cE * (4 * u2 * pu * zb2 - u2 * pk[2]
                           - 4 * pu * pp * zb2 + pp * pk[2])
                   + cF * zb2 * (2 * pu * zg - (pk[0] * gk[0] + pk[1] * gk[1]
                                                + pk[2] * gk[2]) - stl)
                   + cG * a7k[2])
        grad[i, 0], grad[i, 1], grad[i, 2] = g0, g1, g2
        val[i] = av
        dtv[i] = at
    return grad, val, dtv


@njit(parallel=True, fastmath=True, cache=True)
def vn_interior(targets, target_src, times, X, XD, P, PDOT, FC, FCDOT,
                VOL, VOLDOT, DTPHI, GPHI, t_eval, c, eps2):
    """Interior parts of the exact wave-field representation.

    Sums the source kernel (for the value), the a/b/c kernels of the time
    derivative and of the gradient, with exact gamma and Doppler factors.
    FC carries the transported density values, VOL the evolving volumes;
    DTPHI/GPHI are the resolved fields at the particles (linearly
    interpolated between frames).  Returns (phi_S, dtphi_abc, grad_abc).
    """
    m = targets.shape[0]
    n = X.shape[1]
    phis = np.zeros(m)
    dtv = np.zeros(m)
    grad = np.zeros((m, 3))
    ic = 1.0 / c
    ic2 = ic * ic
    ic3 = ic2 * ic
    for i in prange(m):
        xi0, xi1, xi2 = targets[i, 0], targets[i, 1], targets[i, 2]
        excl = target_src[i]
        acc_s = 0.0
        acc_t = 0.0
        g0 = g1 = g2 = 0.0
        pk = np.empty(3)
        gert = np.empty(3)
        for k in range(n):
            if k == excl:
                continue
            ok, j, u = _find_crossing(times, X, XD, k, t_eval, c,
                                      xi0, xi1, xi2)
            if not ok:
                continue
            h = times[j + 1] - times[j]
            z0 = _hermite(X[j, k, 0], X[j + 1, k, 0], XD[j, k, 0],
                          XD[j + 1, k, 0], h, u) - xi0
            z1 = _hermite(X[j, k, 1], X[j + 1, k, 1], XD[j, k, 1],
                          XD[j + 1, k, 1], h, u) - xi1
            z2 = _hermite(X[j, k, 2], X[j + 1, k, 2], XD[j, k, 2],
                          XD[j + 1, k, 2], h, u) - xi2
            _interp3(P, PDOT, j, k, h, u, pk)
            fck = _hermite(FC[j, k], FC[j + 1, k], FCDOT[j, k],
                           FCDOT[j + 1, k], h, u)
            vk = _hermite(VOL[j, k], VOL[j + 1, k], VOLDOT[j, k],
                          VOLDOT[j + 1, k], h, u)
            dtf = (1 - u) * DTPHI[j, k] + u * DTPHI[j + 1, k]
            for a in range(3):
                gert[a] = (1 - u) * GPHI[j, k, a] + u * GPHI[j + 1, k, a]
            pp = pk[0] * pk[0] + pk[1] * pk[1] + pk[2] * pk[2]
            gam = 1.0 / np.sqrt(1.0 + pp * ic2)
            ph0, ph1, ph2 = gam * pk[0], gam * pk[1], gam * pk[2]
            php = gam * gam * pp  # |phat|^2
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            zb0, zb1, zb2 = z0 / s, z1 / s, z2 / s
            zph = zb0 * ph0 + zb1 * ph1 + zb2 * ph2
            # kernel Doppler factor (momentum) and retardation Jacobian
            # (trajectory velocity); identical on physical trajectories
            vx0 = (1 - u) * XD[j, k, 0] + u * XD[j + 1, k, 0]
            vx1 = (1 - u) * XD[j, k, 1] + u * XD[j + 1, k, 1]
            vx2 = (1 - u) * XD[j, k, 2] + u * XD[j + 1, k, 2]
            Djac = 1.0 + (zb0 * vx0 + zb1 * vx1 + zb2 * vx2) * ic
            D = 1.0 + zph * ic
            D3 = D * D * Djac
            w = fck * vk
            sphi = dtf + ph0 * gert[0] + ph1 * gert[1] + ph2 * gert[2]
            # value kernel has no Doppler factor of its own
            acc_s -= ic2 * gam * w / (s * Djac)
            # time derivative kernels a, b, c
            e0, e1, e2 = zb0 + ic * ph0, zb1 + ic * ph1, zb2 + ic * ph2
            ee = e0 * e0 + e1 * e1 + e2 * e2
            pe = ph0 * e0 + ph1 * e1 + ph2 * e2
            gedot = gert[0] * e0 + gert[1] * e1 + gert[2] * e2
            acc_t += (ic2 * gam * pe * w / (s2 * D3)
                      - ic2 * gam * ee * sphi * w / (s * D3)
                      - ic * gam**3 * gedot * w / (s * D3))
            # gradient kernels a, b, c
            cfa = -ic2 * gam * w / (s2 * D3)
            fb = -ic3 * gam * ee * sphi * w / (s * D3)
            fc = -ic2 * gam**3 * gedot * w / (s * D3)
            # a-kernel vector: e - c^-2 (zb php - phat zph)
            a0 = e0 - ic2 * (zb0 * php - ph0 * zph)
            a1 = e1 - ic2 * (zb1 * php - ph1 * zph)
            a2 = e2 - ic2 * (zb2 * php - ph2 * zph)
            g0 += cfa * a0 + (fb + fc) * zb0
            g1 += cfa * a1 + (fb + fc) * zb1
            g2 += cfa * a2 + (fb + fc) * zb2
        phis[i] = acc_s
        dtv[i] = acc_t
        grad[i, 0], grad[i, 1], grad[i, 2] = g0, g1, g2
    return phis, dtv, grad
