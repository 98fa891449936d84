"""Compiled kernels for the cut-off rigid motions and their composition.

Everything here works on raw float64 arrays. Derivatives are propagated in
forward mode through the RK4 steps, so they are the exact derivatives of the
discrete maps that the value routines compute.
"""
import math

import numpy as np
from numba import njit

SUPPORT_RADIUS = 3.0
FLAT_RADIUS = 2.0


@njit(cache=True, nogil=True)
def _bump_exponent(r):
    # g(3 - r) / (g(3 - r) + g(r - 2)) = 1 / (1 + exp(u)) with g(x) = exp(-1/x)
    return 1.0 / (SUPPORT_RADIUS - r) - 1.0 / (r - FLAT_RADIUS)


@njit(cache=True, nogil=True)
def bump_and_deriv(r):
    if r <= FLAT_RADIUS:
        return 1.0, 0.0
    if r >= SUPPORT_RADIUS:
        return 0.0, 0.0
    u = _bump_exponent(r)
    du = 1.0 / (SUPPORT_RADIUS - r) ** 2 + 1.0 / (r - FLAT_RADIUS) ** 2
    # beta = 1 / (1 + e^u), beta' = -e^u / (1 + e^u)^2 du, evaluated without overflow
    if u <= 0.0:
        e = math.exp(u)
        b = 1.0 / (1.0 + e)
        return b, -e * b * b * du
    e = math.exp(-u)
    b = e / (1.0 + e)
    return b, -b / (1.0 + e) * du


@njit(cache=True, nogil=True)
def bump(r):
    return bump_and_deriv(r)[0]


@njit(cache=True, nogil=True)
def bump_deriv(r):
    return bump_and_deriv(r)[1]


@njit(cache=True, nogil=True)
def _norm(y):
    s = 0.0
    for i in range(y.shape[0]):
        s += y[i] * y[i]
    return math.sqrt(s)


@njit(cache=True, nogil=True)
def skew_mat(coef, n):
    k = np.zeros((n, n))
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            k[i, j] = coef[idx]
            k[j, i] = -coef[idx]
            idx += 1
    return k


@njit(cache=True, nogil=True)
def _rodrigues_coeffs(th):
    # a = sin th / th, b = (1 - cos th) / th^2 and (a'/th, b'/th)
    if th < 1e-4:
        t2 = th * th
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        da = -1.0 / 3.0 + t2 / 30.0
        db = -1.0 / 12.0 + t2 / 180.0
    else:
        s = math.sin(th)
        c = math.cos(th)
        a = s / th
        b = (1.0 - c) / (th * th)
        da = (th * c - s) / (th * th * th)
        db = (th * s - 2.0 * (1.0 - c)) / (th * th * th * th)
    return a, b, da, db


@njit(cache=True, nogil=True)
def expm_skew(k):
    """exp of a 2x2 or 3x3 skew matrix by closed form."""
    n = k.shape[0]
    out = np.eye(n)
    if n == 2:
        th = k[1, 0]
        c = math.cos(th)
        s = math.sin(th)
        out[0, 0] = c
        out[0, 1] = -s
        out[1, 0] = s
        out[1, 1] = c
        return out
    w0 = k[2, 1]
    w1 = k[0, 2]
    w2 = k[1, 0]
    th = math.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    a, b, _, _ = _rodrigues_coeffs(th)
    k2 = k @ k
    for i in range(3):
        for j in range(3):
            out[i, j] += a * k[i, j] + b * k2[i, j]
    return out


@njit(cache=True, nogil=True)
def _expm_coef_directional(k, y, n):
    """Columns d/dc_m [exp(K(c)) y] over the skew coefficients c of K."""
    nc = n * (n - 1) // 2
    out = np.zeros((n, nc))
    e = expm_skew(k)
    ey = e @ y
    if n == 2:
        # K = c * [[0, 1], [-1, 0]] commutes with exp(K)
        out[0, 0] = ey[1]
        out[1, 0] = -ey[0]
        return out
    # coefficients (c01, c02, c12) map to axis w = (-c12, c02, -c01)
    w = np.array([k[2, 1], k[0, 2], k[1, 0]])
    th = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    a, b, da, db = _rodrigues_coeffs(th)
    ky = k @ y
    kky = k @ ky
    dwdc = np.zeros((3, 3))
    dwdc[2, 0] = -1.0
    dwdc[1, 1] = 1.0
    dwdc[0, 2] = -1.0
    for j in range(3):
        # generator of rotations about axis j: E_j y = e_j x y
        ej = np.zeros(3)
        ej[j] = 1.0
        ejy = np.array([ej[1] * y[2] - ej[2] * y[1], ej[2] * y[0] - ej[0] * y[2], ej[0] * y[1] - ej[1] * y[0]])
        ejky = np.array([ej[1] * ky[2] - ej[2] * ky[1], ej[2] * ky[0] - ej[0] * ky[2], ej[0] * ky[1] - ej[1] * ky[0]])
        kejy = k @ ejy
        col = da * w[j] * ky + a * ejy + db * w[j] * kky + b * (ejky + kejy)
        for m in range(3):
            if dwdc[j, m] != 0.0:
                for i in range(3):
                    out[i, m] += dwdc[j, m] * col[i]
    return out


@njit(cache=True, nogil=True)
def rotation_block(y, coef, n, out_jy, out_jc):
    """Cut-off rotation ``exp(beta(|y|) K) y`` with exact derivatives.

    Writes d/dy into out_jy (n x n) and d/dcoef into out_jc (n x nc).
    """
    k = skew_mat(coef, n)
    r = _norm(y)
    b = bump(r)
    kb = b * k
    e = expm_skew(kb)
    z = e @ y
    for i in range(n):
        for j in range(n):
            out_jy[i, j] = e[i, j]
    db = bump_deriv(r)
    if db != 0.0:
        kz = k @ z
        for i in range(n):
            for j in range(n):
                out_jy[i, j] += kz[i] * db * y[j] / r
    dc = _expm_coef_directional(kb, y, n)
    nc = n * (n - 1) // 2
    for i in range(n):
        for m in range(nc):
            out_jc[i, m] = b * dc[i, m]
    return z


@njit(cache=True, nogil=True)
def flow_steps(t, flow_step):
    m = int(math.ceil(abs(t) / flow_step))
    return max(m, 1)


@njit(cache=True, nogil=True)
def axis_flow(z, axis, t, flow_step, tang, tcol):
    """RK4 flow of beta(|p|) e_axis for time t, in place on z.

    ``tang`` (n x m) holds dz/d(inputs) and is updated in place; column
    ``tcol`` (if >= 0) is the derivative with respect to t itself.
    """
    n = z.shape[0]
    nt = tang.shape[1]
    if _norm(z) >= SUPPORT_RADIUS:
        # vector field vanishes identically along the trajectory
        return z
    # the field is the constant e_axis on the closed ball of radius 2, which
    # is convex: a path with both ends inside is an exact translation (RK4
    # reproduces it up to rounding)
    if _norm(z) <= FLAT_RADIUS:
        zi = z[axis]
        z[axis] = zi + t
        if _norm(z) <= FLAT_RADIUS:
            if tcol >= 0:
                tang[axis, tcol] += 1.0
            return z
        z[axis] = zi
    m = flow_steps(t, flow_step)
    h = t / m
    dh = 1.0 / m
    zs = np.empty(n)
    row = np.empty(nt)
    dks = np.empty((4, nt))
    ks = np.empty(4)
    for _ in range(m):
        # stage states differ from z only in coordinate `axis`
        for s in range(4):
            for i in range(n):
                zs[i] = z[i]
            if s == 0:
                coef = 0.0
            elif s < 3:
                coef = 0.5
            else:
                coef = 1.0
            if s > 0:
                zs[axis] += coef * h * ks[s - 1]
            r = _norm(zs)
            ks[s], dbr = bump_and_deriv(r)
            # d(stage state) = tang + coef*(h*dk_prev + k_prev*dh*e_t)
            for c in range(nt):
                acc = 0.0
                if dbr != 0.0:
                    for i in range(n):
                        v = tang[i, c]
                        if i == axis and s > 0:
                            v += coef * h * dks[s - 1, c]
                            if c == tcol:
                                v += coef * ks[s - 1] * dh
                        acc += zs[i] * v
                    acc *= dbr / r
                row[c] = acc
            for c in range(nt):
                dks[s, c] = row[c]
        incr = (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3]) / 6.0
        z[axis] += h * incr
        for c in range(nt):
            tang[axis, c] += h * (dks[0, c] + 2.0 * dks[1, c] + 2.0 * dks[2, c] + dks[3, c]) / 6.0
        if tcol >= 0:
            tang[axis, tcol] += incr * dh
    return z


@njit(cache=True, nogil=True)
def local_block(y, params, n, flow_step, jy, jp):
    """psi(t, v)(y) = tau(t) o L(v) (y) in chart coordinates.

    params = (t_1..t_n, skew coefficients). jy is n x n, jp is n x len(params).
    """
    nc = n * (n - 1) // 2
    bd = n + nc
    jc = np.zeros((n, nc))
    z = rotation_block(y, params[n:], n, jy, jc)
    # tangent columns: [d/dy (n) | d/dt (n) | d/dcoef (nc)]
    tang = np.zeros((n, n + bd))
    for i in range(n):
        for j in range(n):
            tang[i, j] = jy[i, j]
        for m in range(nc):
            tang[i, n + n + m] = jc[i, m]
    for ax in range(n):
        z = axis_flow(z, ax, params[ax], flow_step, tang, n + ax)
    for i in range(n):
        for j in range(n):
            jy[i, j] = tang[i, j]
        for j in range(bd):
            jp[i, j] = tang[i, n + j]
    return z


@njit(cache=True, nogil=True)
def local_value(y, params, n, flow_step):
    """Value-only version of local_block."""
    nc = n * (n - 1) // 2
    k = skew_mat(params[n:], n)
    r = _norm(y)
    if r >= SUPPORT_RADIUS:
        return y.copy()
    e = expm_skew(bump(r) * k)
    z = e @ y
    dummy = np.zeros((n, 0))
    for ax in range(n):
        z = axis_flow(z, ax, params[ax], flow_step, dummy, -1)
    return z


@njit(cache=True, nogil=True)
def _any_nonzero(a):
    for i in range(a.shape[0]):
        if a[i] != 0.0:
            return True
    return False


@njit(cache=True, nogil=True)
def family_point(x, w3, centers, scale, flow_step):
    """Push a torus point through all blocks of the composed family.

    w3 has shape (rounds, charts, block_dim); blocks act in round-major,
    chart-minor order.
    """
    n = x.shape[0]
    rounds, charts, bd = w3.shape
    xc = x.copy()
    y = np.empty(n)
    for r in range(rounds):
        for c in range(charts):
            params = w3[r, c]
            if not _any_nonzero(params):
                continue
            for i in range(n):
                d = xc[i] - centers[c, i]
                d -= np.rint(d)
                y[i] = d / scale
            if _norm(y) >= SUPPORT_RADIUS:
                continue
            z = local_value(y, params, n, flow_step)
            for i in range(n):
                v = (centers[c, i] + scale * z[i]) % 1.0
                if v >= 1.0:
                    v -= 1.0
                xc[i] = v
    return xc


@njit(cache=True, nogil=True)
def family_points(xs, w3, centers, scale, flow_step):
    out = np.empty_like(xs)
    for p in range(xs.shape[0]):
        out[p] = family_point(xs[p], w3, centers, scale, flow_step)
    return out


@njit(cache=True, nogil=True)
def family_points_derivs(xs, w3, centers, scale, flow_step, want_param):
    npts, n = xs.shape
    rounds, charts, bd = w3.shape
    big_n = rounds * charts * bd
    out = np.empty_like(xs)
    jacs = np.empty((npts, n, n))
    pcols = big_n if want_param else 0
    pders = np.zeros((npts, n, pcols))
    for p in range(npts):
        jac = np.eye(n)
        if want_param:
            pd = np.zeros((n, big_n))
        else:
            pd = np.zeros((n, 0))
        out[p] = family_point_j(xs[p], w3, centers, scale, flow_step, jac, pd, want_param)
        jacs[p] = jac
        if want_param:
            pders[p] = pd
    return out, jacs, pders


@njit(cache=True, nogil=True)
def family_point_j(x, w3, centers, scale, flow_step, jac, pder, want_param):
    """Like family_point with derivatives, optionally skipping d(ev_x)_w."""
    n = x.shape[0]
    rounds, charts, bd = w3.shape
    xc = x.copy()
    y = np.empty(n)
    jy = np.empty((n, n))
    jp = np.empty((n, bd))
    for r in range(rounds):
        for c in range(charts):
            for i in range(n):
                d = xc[i] - centers[c, i]
                d -= np.rint(d)
                y[i] = d / scale
            if _norm(y) >= SUPPORT_RADIUS:
                continue
            params = w3[r, c]
            active = _any_nonzero(params)
            if not active and not want_param:
                continue
            z = local_block(y, params, n, flow_step, jy, jp)
            jac[:, :] = jy @ jac
            if want_param:
                col0 = (r * charts + c) * bd
                pder[:, :] = jy @ pder
                for i in range(n):
                    for j in range(bd):
                        pder[i, col0 + j] += scale * jp[i, j]
            if active:
                for i in range(n):
                    v = (centers[c, i] + scale * z[i]) % 1.0
                    if v >= 1.0:
                        v -= 1.0
                    xc[i] = v
    return xc
