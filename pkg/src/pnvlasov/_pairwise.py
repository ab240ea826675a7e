"""Direct pairwise summation kernels (numba).

Conventions shared by every routine here:

* ``z = y_source - x_target`` (the displacement TO the source), matching the
  ``x + z`` convention of the integral formulas in the solver modules.
* ``s = sqrt(|z|^2 + eps^2)`` is the Plummer-softened distance and
  ``zb = z / s`` the softened unit vector, so ``1/|z|``, ``zb/|z|^2`` etc.
  stay bounded at coincidence.
* ``exclude`` means target i and source i are the same particle (requires
  equal lengths) and the diagonal pair is skipped.
* ``rmin``/``rmax`` restrict sources to ``rmin <= |z| <= rmax`` (unsoftened),
  which realizes exterior/interior domain splits; pass 0 and inf for full
  sums.

Parallelization is over targets only, each target reduced serially in fixed
source order, so results are bitwise reproducible.
"""
import numpy as np
from numba import njit, prange

_INF = np.inf


@njit(parallel=True, fastmath=True, cache=True)
def newtonian_phi_grad(tx, sx, sw, eps2, exclude, rmin, rmax):
    m = tx.shape[0]
    n = sx.shape[0]
    phi = np.zeros(m)
    grad = np.zeros((m, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc_p = 0.0
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s2 = r2 + eps2
            s = np.sqrt(s2)
            w = sw[k]
            acc_p -= w / s
            f = w / (s2 * s)
            g0 -= f * z0
            g1 -= f * z1
            g2 -= f * z2
        phi[i] = acc_p
        grad[i, 0] = g0
        grad[i, 1] = g1
        grad[i, 2] = g2
    return phi, grad


@njit(parallel=True, fastmath=True, cache=True)
def newtonian_phi_grad_hess(tx, sx, sw, eps2, exclude):
    m = tx.shape[0]
    n = sx.shape[0]
    phi = np.zeros(m)
    grad = np.zeros((m, 3))
    hess = np.zeros((m, 3, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc_p = 0.0
        g = np.zeros(3)
        h = np.zeros((3, 3))
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            w = sw[k]
            s3 = s2 * s
            s5 = s3 * s2
            acc_p -= w / s
            g[0] -= w * z0 / s3
            g[1] -= w * z1 / s3
            g[2] -= w * z2 / s3
            c3 = w / s3
            c5 = 3.0 * w / s5
            h[0, 0] += c3 - c5 * z0 * z0
            h[1, 1] += c3 - c5 * z1 * z1
            h[2, 2] += c3 - c5 * z2 * z2
            h[0, 1] -= c5 * z0 * z1
            h[0, 2] -= c5 * z0 * z2
            h[1, 2] -= c5 * z1 * z2
        phi[i] = acc_p
        for a in range(3):
            grad[i, a] = g[a]
        hess[i, 0, 0] = h[0, 0]
        hess[i, 1, 1] = h[1, 1]
        hess[i, 2, 2] = h[2, 2]
        hess[i, 0, 1] = h[0, 1]
        hess[i, 1, 0] = h[0, 1]
        hess[i, 0, 2] = h[0, 2]
        hess[i, 2, 0] = h[0, 2]
        hess[i, 1, 2] = h[1, 2]
        hess[i, 2, 1] = h[1, 2]
    return phi, grad, hess


@njit(parallel=True, fastmath=True, cache=True)
def dtphi2_and_grad(tx, sx, sp, sw, eps2, exclude):
    # d/dt of the Newtonian potential of a transported density:
    # dtphi(x) = sum w (z.p)/s^3, grad dtphi = sum w (3(z.p) z/s^5 - p/s^3).
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    grad = np.zeros((m, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            s3 = s2 * s
            w = sw[k]
            zp = z0 * sp[k, 0] + z1 * sp[k, 1] + z2 * sp[k, 2]
            acc += w * zp / s3
            c5 = 3.0 * w * zp / (s3 * s2)
            c3 = w / s3
            g0 += c5 * z0 - c3 * sp[k, 0]
            g1 += c5 * z1 - c3 * sp[k, 1]
            g2 += c5 * z2 - c3 * sp[k, 2]
        val[i] = acc
        grad[i, 0] = g0
        grad[i, 1] = g1
        grad[i, 2] = g2
    return val, grad


@njit(parallel=True, fastmath=True, cache=True)
def linear_potential(tx, sx, sq, eps2, rmin, rmax):
    # sum q * s : the |z| kernel (biharmonic Green function up to -1/(8 pi)).
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    grad = np.zeros((m, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for k in range(n):
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s = np.sqrt(r2 + eps2)
            q = sq[k]
            acc += q * s
            f = q / s
            g0 -= f * z0
            g1 -= f * z1
            g2 -= f * z2
        val[i] = acc
        grad[i, 0] = g0
        grad[i, 1] = g1
        grad[i, 2] = g2
    return val, grad


@njit(parallel=True, fastmath=True, cache=True)
def vp_full_pass(tx, sx, sp, sw, eps2, exclude):
    """One combined sweep for the Newtonian stage fields at the targets.

    Returns phi, grad phi, the symmetric Hessian (6 components, order
    xx yy zz xy xz yz), dt phi and grad dt phi of the 1/|z| potential of the
    transported density.
    """
    m = tx.shape[0]
    n = sx.shape[0]
    phi = np.zeros(m)
    grad = np.zeros((m, 3))
    hess = np.zeros((m, 6))
    dtphi = np.zeros(m)
    gdt = np.zeros((m, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        a_p = 0.0
        g0 = g1 = g2 = 0.0
        h0 = h1 = h2 = h3 = h4 = h5 = 0.0
        a_dt = 0.0
        d0 = d1 = d2 = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            s3 = s2 * s
            s5 = s3 * s2
            w = sw[k]
            a_p -= w / s
            w3 = w / s3
            g0 -= w3 * z0
            g1 -= w3 * z1
            g2 -= w3 * z2
            w5 = 3.0 * w / s5
            h0 += w3 - w5 * z0 * z0
            h1 += w3 - w5 * z1 * z1
            h2 += w3 - w5 * z2 * z2
            h3 -= w5 * z0 * z1
            h4 -= w5 * z0 * z2
            h5 -= w5 * z1 * z2
            p0, p1, p2 = sp[k, 0], sp[k, 1], sp[k, 2]
            zp = z0 * p0 + z1 * p1 + z2 * p2
            a_dt += w3 * zp
            c5 = 3.0 * w * zp / s5
            d0 += c5 * z0 - w3 * p0
            d1 += c5 * z1 - w3 * p1
            d2 += c5 * z2 - w3 * p2
        phi[i] = a_p
        grad[i, 0], grad[i, 1], grad[i, 2] = g0, g1, g2
        hess[i, 0], hess[i, 1], hess[i, 2] = h0, h1, h2
        hess[i, 3], hess[i, 4], hess[i, 5] = h3, h4, h5
        dtphi[i] = a_dt
        gdt[i, 0], gdt[i, 1], gdt[i, 2] = d0, d1, d2
    return phi, grad, hess, dtphi, gdt


@njit(parallel=True, fastmath=True, cache=True)
def phi4_grad_alt(tx, sx, sp, sw, sq2, sg, eps2, exclude, rmin, rmax):
    """Gradient of the correction potential by the partial-integration route.

    grad phi4 = -sum q2 z/s^3                      (mu2 charges)
                + 1/2 sum w [3u^2 zb - 2u p - p^2 zb]/s^2
                - 1/2 sum w [g - zb (zb.g)]/s      (g = grad phi2 at source)
    """
    m = tx.shape[0]
    n = sx.shape[0]
    grad = np.zeros((m, 3))
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s2 = r2 + eps2
            s = np.sqrt(s2)
            zb0, zb1, zb2 = z0 / s, z1 / s, z2 / s
            p0, p1, p2 = sp[k, 0], sp[k, 1], sp[k, 2]
            u = zb0 * p0 + zb1 * p1 + zb2 * p2
            pp = p0 * p0 + p1 * p1 + p2 * p2
            w = sw[k]
            cq = sq2[k] / (s2 * s)
            g0 -= cq * z0
            g1 -= cq * z1
            g2 -= cq * z2
            ca = 0.5 * w / s2
            cb = 3.0 * u * u - pp
            g0 += ca * (cb * zb0 - 2.0 * u * p0)
            g1 += ca * (cb * zb1 - 2.0 * u * p1)
            g2 += ca * (cb * zb2 - 2.0 * u * p2)
            gp0, gp1, gp2 = sg[k, 0], sg[k, 1], sg[k, 2]
            zg = zb0 * gp0 + zb1 * gp1 + zb2 * gp2
            cc = 0.5 * w / s
            g0 -= cc * (gp0 - zb0 * zg)
            g1 -= cc * (gp1 - zb1 * zg)
            g2 -= cc * (gp2 - zb2 * zg)
        grad[i, 0] = g0
        grad[i, 1] = g1
        grad[i, 2] = g2
    return grad


@njit(parallel=True, fastmath=True, cache=True)
def phi4_value_alt(tx, sx, sp, sq2, scdt, eps2, exclude, rmin, rmax):
    # phi4 = -sum q2/s - 1/2 sum cdt (zb.p), cdt = vol * (eulerian dt f0).
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s = np.sqrt(r2 + eps2)
            u = (z0 * sp[k, 0] + z1 * sp[k, 1] + z2 * sp[k, 2]) / s
            acc += -sq2[k] / s - 0.5 * scdt[k] * u
        val[i] = acc
    return val


@njit(parallel=True, fastmath=True, cache=True)
def phi4_value_parts(tx, sx, sp, sw, sq2, sg, eps2, exclude, rmin, rmax):
    """Correction potential value by the same partial-integration route as
    :func:`phi4_grad_alt`:

    phi4 = -sum q2/s - 1/2 [ sum w (p^2 - u^2)/s - sum w (zb.g) ].
    """
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s = np.sqrt(r2 + eps2)
            p0, p1, p2 = sp[k, 0], sp[k, 1], sp[k, 2]
            u = (z0 * p0 + z1 * p1 + z2 * p2) / s
            pp = p0 * p0 + p1 * p1 + p2 * p2
            zg = (z0 * sg[k, 0] + z1 * sg[k, 1] + z2 * sg[k, 2]) / s
            acc += -sq2[k] / s - 0.5 * sw[k] * ((pp - u * u) / s - zg)
        val[i] = acc
    return val


@njit(parallel=True, fastmath=True, cache=True)
def dt_lead(tx, sx, sp, sw, eps2, exclude, rmin, rmax):
    """sum w (zb.p)/s^2: leading kernel of the potential's time derivative."""
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            r2 = z0 * z0 + z1 * z1 + z2 * z2
            if r2 < rmin * rmin or r2 > rmax * rmax:
                continue
            s2 = r2 + eps2
            s = np.sqrt(s2)
            zp = z0 * sp[k, 0] + z1 * sp[k, 1] + z2 * sp[k, 2]
            acc += sw[k] * zp / (s2 * s)
        val[i] = acc
    return val


@njit(parallel=True, fastmath=True, cache=True)
def dtphi4_value(tx, sx, sp, svol, sf0, sf2, sw, sg, shp, sgdt, sdtphi2,
                 eps2, exclude):
    """Time derivative of the correction potential via the moment recursion.

    dtphi4 = -N[dt mu2] - 1/2 L[dt^3 mu0], with every divergence moved onto
    the kernels; needs per-source grad phi2 (sg), H.p (shp), grad dtphi2
    (sgdt) and dtphi2 values.
    """
    m = tx.shape[0]
    n = sx.shape[0]
    val = np.zeros(m)
    for i in prange(m):
        xi0, xi1, xi2 = tx[i, 0], tx[i, 1], tx[i, 2]
        acc = 0.0
        for k in range(n):
            if exclude and k == i:
                continue
            z0 = sx[k, 0] - xi0
            z1 = sx[k, 1] - xi1
            z2 = sx[k, 2] - xi2
            s2 = z0 * z0 + z1 * z1 + z2 * z2 + eps2
            s = np.sqrt(s2)
            zb0, zb1, zb2 = z0 / s, z1 / s, z2 / s
            p0, p1, p2 = sp[k, 0], sp[k, 1], sp[k, 2]
            u = zb0 * p0 + zb1 * p1 + zb2 * p2
            pp = p0 * p0 + p1 * p1 + p2 * p2
            w = sw[k]
            # N[dt mu2]
            ndt = -svol[k] * u * (sf2[k] - pp * sf0[k]) / s2
            gp = sg[k, 0] * p0 + sg[k, 1] * p1 + sg[k, 2] * p2
            ndt += w * (sdtphi2[k] + 2.0 * gp) / s
            # L[dt^3 mu0] pieces
            zg = zb0 * sg[k, 0] + zb1 * sg[k, 1] + zb2 * sg[k, 2]
            l3 = w * (3.0 * u * u * u - 3.0 * u * pp) / s2
            l3 -= 3.0 * w * (gp - zg * u) / s
            l3 -= w * (zb0 * shp[k, 0] + zb1 * shp[k, 1] + zb2 * shp[k, 2])
            l3 -= w * (zb0 * sgdt[k, 0] + zb1 * sgdt[k, 1] + zb2 * sgdt[k, 2])
            acc += -ndt - 0.5 * l3
        val[i] = acc
    return val
