"""Compiled loops over padded grids.

Grids are padded at the front to three axes, ``(1, 1, n)`` / ``(1, n, n)`` /
``(n, n, n)``, so the innermost axis is always a full row and the inner
loops vectorise. Vector fields carry three components, component ``k``
belonging to padded axis ``k``.

Every routine writes each output cell once and sums over directions in
index order; splitting the outer range between workers cannot change the
result.
"""
import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True, error_model="numpy")


@njit(inline="always")
def _wrap(i, n):
    if i < 0:
        return i + n
    if i >= n:
        return i - n
    return i


@njit(inline="always")
def _at(a, x, y, z, axis, k, nx, ny, nz):
    # a[c + k e_axis], periodic
    if axis == 0:
        return a[_wrap(x + k, nx), y, z]
    if axis == 1:
        return a[x, _wrap(y + k, ny), z]
    return a[x, y, _wrap(z + k, nz)]


@njit(**_OPTS)
def void_terms(phi, w1, qaxes, gaxes, Phi, grad, x0, x1):
    """Cell-integrated void fraction ``phi + w1 * lap_h phi`` and ``grad_h phi``.

    ``qaxes``/``gaxes`` flag the axes entering the quadrature and the
    gradient; with no quadrature axes ``Phi`` is the local value.
    """
    nx, ny, nz = phi.shape
    nq = qaxes[0] + qaxes[1] + qaxes[2]
    for x in range(x0, x1):
        for y in range(ny):
            for z in range(nz):
                c = phi[x, y, z]
                if nq > 0:
                    lap = 0.0
                    for a in range(3):
                        if qaxes[a]:
                            lap += _at(phi, x, y, z, a, 1, nx, ny, nz) + _at(phi, x, y, z, a, -1, nx, ny, nz)
                    lap = lap - 2 * nq * c
                    Phi[x, y, z] = c + w1 * lap
                else:
                    Phi[x, y, z] = c
                for a in range(3):
                    if gaxes[a]:
                        grad[a, x, y, z] = (
                            _at(phi, x, y, z, a, 1, nx, ny, nz) - _at(phi, x, y, z, a, -1, nx, ny, nz)
                        ) / 2.0
                    else:
                        grad[a, x, y, z] = 0.0


@njit(**_OPTS)
def collide_stream(f, fn, Phi, grad, fext, tau, cvec, w, cs2, x0, x1):
    """BGK collision with Guo forcing (external + pressure correction), pushed into ``fn``.

    Returns the flat index of the first cell whose zeroth moment is not a
    positive finite number, or -1.
    """
    Q = w.shape[0]
    nx, ny, nz = Phi.shape
    inv_tau = 1.0 / tau
    fpref = 1.0 - 0.5 / tau
    inv_cs2 = 1.0 / cs2
    half_inv_cs4 = 0.5 / (cs2 * cs2)
    inv_cs4 = 1.0 / (cs2 * cs2)
    cf = cvec.astype(np.float64)
    m = np.empty(nz)
    jx = np.empty(nz)
    jy = np.empty(nz)
    jz = np.empty(nz)
    ux = np.empty(nz)
    uy = np.empty(nz)
    uz = np.empty(nz)
    Fx = np.empty(nz)
    Fy = np.empty(nz)
    Fz = np.empty(nz)
    uu = np.empty(nz)
    uF = np.empty(nz)
    row = np.empty(nz)
    bad = -1
    for x in range(x0, x1):
        for y in range(ny):
            for z in range(nz):
                m[z] = 0.0
                jx[z] = 0.0
                jy[z] = 0.0
                jz[z] = 0.0
            for i in range(Q):
                c0 = cf[0, i]
                c1 = cf[1, i]
                c2 = cf[2, i]
                for z in range(nz):
                    v = f[i, x, y, z]
                    m[z] += v
                    jx[z] += c0 * v
                    jy[z] += c1 * v
                    jz[z] += c2 * v
            for z in range(nz):
                mz = m[z]
                if bad < 0 and not (mz > 0.0 and mz < np.inf):
                    bad = (x * ny + y) * nz + z
                rho = mz / Phi[x, y, z]
                a = fext[0, x, y, z] + rho * cs2 * grad[0, x, y, z]
                b = fext[1, x, y, z] + rho * cs2 * grad[1, x, y, z]
                c = fext[2, x, y, z] + rho * cs2 * grad[2, x, y, z]
                Fx[z] = a
                Fy[z] = b
                Fz[z] = c
                vx = (jx[z] + 0.5 * a) / mz
                vy = (jy[z] + 0.5 * b) / mz
                vz = (jz[z] + 0.5 * c) / mz
                ux[z] = vx
                uy[z] = vy
                uz[z] = vz
                uu[z] = vx * vx + vy * vy + vz * vz
                uF[z] = vx * a + vy * b + vz * c
            for i in range(Q):
                c0 = cf[0, i]
                c1 = cf[1, i]
                c2 = cf[2, i]
                wi = w[i]
                for z in range(nz):
                    cu = c0 * ux[z] + c1 * uy[z] + c2 * uz[z]
                    cF = c0 * Fx[z] + c1 * Fy[z] + c2 * Fz[z]
                    feq = wi * m[z] * (1.0 + cu * inv_cs2 + (cu * cu - cs2 * uu[z]) * half_inv_cs4)
                    om = fpref * wi * (cF * inv_cs2 + (cu * cF - cs2 * uF[z]) * inv_cs4)
                    fi = f[i, x, y, z]
                    row[z] = fi + inv_tau * (feq - fi) + om
                tx = _wrap(x + cvec[0, i], nx)
                ty = _wrap(y + cvec[1, i], ny)
                s = cvec[2, i]
                if s == 0:
                    for z in range(nz):
                        fn[i, tx, ty, z] = row[z]
                elif s == 1:
                    for z in range(nz - 1):
                        fn[i, tx, ty, z + 1] = row[z]
                    fn[i, tx, ty, 0] = row[nz - 1]
                else:
                    for z in range(1, nz):
                        fn[i, tx, ty, z - 1] = row[z]
                    fn[i, tx, ty, nz - 1] = row[0]
    return bad


@njit(inline="always")
def _diff(src, dst, axis, inv2h):
    # dst = central difference of src along a padded axis, periodic
    nx, ny, nz = src.shape
    for x in range(nx):
        for y in range(ny):
            d = dst[x, y]
            if axis == 2:
                r = src[x, y]
                for z in range(1, nz - 1):
                    d[z] = (r[z + 1] - r[z - 1]) * inv2h
                d[0] = (r[1] - r[nz - 1]) * inv2h
                d[nz - 1] = (r[0] - r[nz - 2]) * inv2h
                continue
            if axis == 0:
                r1 = src[_wrap(x + 1, nx), y]
                r0 = src[_wrap(x - 1, nx), y]
            else:
                r1 = src[x, _wrap(y + 1, ny)]
                r0 = src[x, _wrap(y - 1, ny)]
            for z in range(nz):
                d[z] = (r1[z] - r0[z]) * inv2h


@njit(**_OPTS)
def momentum_residual(phi, u, p, dtphiu, axes, h, nu, rho, D, tmp, dtmp, out):
    """``rho d_t(phi u) + rho div(phi u u) + phi grad p - nu rho div(phi (grad u + grad u^T))``.

    ``dtphiu`` is the precomputed time derivative of phi*u. Spatial
    derivatives are central differences with spacing ``h``, the viscous
    term nesting one difference inside another. ``D`` (3, 3, ...) and
    ``tmp``/``dtmp`` are work arrays.
    """
    nx, ny, nz = phi.shape
    inv2h = 1.0 / (2.0 * h)
    nr = nu * rho
    # D[a, b] = d_b u_a
    for a in range(3):
        for b in range(3):
            if axes[a] and axes[b]:
                _diff(u[a], D[a, b], b, inv2h)
    for a in range(3):
        for x in range(nx):
            for y in range(ny):
                o = out[a, x, y]
                s = dtphiu[a, x, y]
                for z in range(nz):
                    o[z] = rho * s[z]
        if not axes[a]:
            continue
        _diff(p, dtmp, a, inv2h)
        for x in range(nx):
            for y in range(ny):
                o = out[a, x, y]
                f = phi[x, y]
                g = dtmp[x, y]
                for z in range(nz):
                    o[z] += f[z] * g[z]
        for b in range(3):
            if not axes[b]:
                continue
            for x in range(nx):
                for y in range(ny):
                    t = tmp[x, y]
                    f = phi[x, y]
                    ua = u[a, x, y]
                    ub = u[b, x, y]
                    for z in range(nz):
                        t[z] = f[z] * ua[z] * ub[z]
            _diff(tmp, dtmp, b, inv2h)
            for x in range(nx):
                for y in range(ny):
                    o = out[a, x, y]
                    g = dtmp[x, y]
                    for z in range(nz):
                        o[z] += rho * g[z]
            for x in range(nx):
                for y in range(ny):
                    t = tmp[x, y]
                    f = phi[x, y]
                    dab = D[a, b, x, y]
                    dba = D[b, a, x, y]
                    for z in range(nz):
                        t[z] = f[z] * (dab[z] + dba[z])
            _diff(tmp, dtmp, b, inv2h)
            for x in range(nx):
                for y in range(ny):
                    o = out[a, x, y]
                    g = dtmp[x, y]
                    for z in range(nz):
                        o[z] -= nr * g[z]
